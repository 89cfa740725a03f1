"""Concentrated volume ``-int <x - x0, n> / |x - x0|^2 d mu``.

Two routes: adaptive singular quadrature over the surface mesh, and an
octree volume integral ``int_E Theta / |x - x0|^2`` over constructive solids.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import NegativeVolume, NonConvergent, TolOutOfRange
from .mesh import TriangleImmersion, point_triangle_distance, total_area
from .varifold import OrientedVarifoldAtoms

MAX_DEPTH = 12
NEAR_FACTOR = 3.0

# degree-2 rule with interior points only, so no quadrature node ever sits on
# a vertex or edge where x0 may lie
_BARY = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])


@dataclass
class ConcVolResult:
    value: float
    abs_error_est: float
    depth: int
    route: str

    def to_dict(self):
        return asdict(self)


def _check_tol(tol):
    if not 1e-8 < tol < 1e-1:
        raise TolOutOfRange(f"tol={tol} must lie in (1e-8, 1e-1)")


def _quad(tri, normals, x0):
    """3-point contribution of each triangle, shape (k,)."""
    area = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    pts = np.einsum("qk,mkd->mqd", _BARY, tri)
    d = pts - x0
    r2 = np.einsum("mqd,mqd->mq", d, d)
    num = np.einsum("mqd,md->mq", d, normals)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(r2 > 0, num / r2, 0.0)
    return -area * g.mean(axis=1)


def _split4(tri, normals):
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
    kids = np.concatenate(
        [np.stack([a, ab, ca], 1), np.stack([ab, b, bc], 1), np.stack([ca, bc, c], 1), np.stack([ab, bc, ca], 1)]
    )
    return kids, np.tile(normals, (4, 1))


def _near(tri, x0):
    cen = tri.mean(axis=1)
    bound = np.linalg.norm(tri - cen[:, None, :], axis=2).max(axis=1)
    la = np.linalg.norm(tri[:, 1] - tri[:, 0], axis=1)
    lb = np.linalg.norm(tri[:, 2] - tri[:, 1], axis=1)
    lc = np.linalg.norm(tri[:, 0] - tri[:, 2], axis=1)
    area = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    circum = la * lb * lc / (4.0 * area)
    return np.linalg.norm(cen - x0, axis=1) - bound < NEAR_FACTOR * circum


def _split_at(tri, normals, x0, scale):
    """Split faces that contain x0 at the closest point (or centroid if x0
    sits on an edge or vertex)."""
    dist, cp = point_triangle_distance(x0, tri)
    on = dist < 1e-12 * scale
    if not on.any():
        return tri, normals
    keep_t, keep_n = [tri[~on]], [normals[~on]]
    for k in np.flatnonzero(on):
        a, b, c = tri[k]
        p = cp[k]
        sub = [np.array([p, b, c]), np.array([a, p, c]), np.array([a, b, p])]
        areas = [np.linalg.norm(np.cross(s[1] - s[0], s[2] - s[0])) for s in sub]
        if min(areas) < 1e-12 * max(areas):
            p = tri[k].mean(axis=0)
            sub = [np.array([p, b, c]), np.array([a, p, c]), np.array([a, b, p])]
        keep_t.append(np.stack(sub))
        keep_n.append(np.repeat(normals[k : k + 1], 3, axis=0))
    return np.concatenate(keep_t), np.concatenate(keep_n)


def concentrated_volume(mesh: TriangleImmersion, x0, tol: float = 1e-4) -> ConcVolResult:
    """Adaptive surface quadrature of the concentrated volume at ``x0``.

    Faces within three circumradii of ``x0`` are 4-split recursively until the
    change between two levels falls below ``tol`` times the running total.
    """
    _check_tol(tol)
    x0 = np.asarray(x0, dtype=np.float64)
    tri = mesh.corners
    normals = mesh.face_normals
    near = _near(tri, x0)
    total_far = float(np.sum(_quad(tri[~near], normals[~near], x0)))
    tri, normals = tri[near], normals[near]
    floor = 1e-9 * math.sqrt(total_area(mesh))
    if len(tri):
        tri, normals = _split_at(tri, normals, x0, math.sqrt(total_area(mesh)))
    depth = 0
    diff = 0.0
    while len(tri):
        coarse = _quad(tri, normals, x0)
        kids, kn = _split4(tri, normals)
        fine = _quad(kids, kn, x0)
        depth += 1
        diff = abs(float(np.sum(fine) - np.sum(coarse)))
        running = total_far + float(np.sum(fine))
        if diff < tol * max(abs(running), floor):
            return ConcVolResult(running, diff, depth, "surface-quadrature")
        kn_near = _near(kids, x0)
        total_far += float(np.sum(fine[~kn_near]))
        tri, normals = kids[kn_near], kn[kn_near]
        if depth >= MAX_DEPTH:
            running = total_far + float(np.sum(fine[kn_near]))
            if diff > 10 * tol * max(abs(running), floor):
                raise NonConvergent(f"concentrated volume at {x0.tolist()} not converged at depth {depth}: change {diff:.3e}")
            return ConcVolResult(running, diff, depth, "surface-quadrature")
    return ConcVolResult(total_far, 0.0, depth, "surface-quadrature")


def algebraic_volume_at(V: OrientedVarifoldAtoms, x0) -> float:
    """``-(1/3) * sum w <x - x0, n>``."""
    if len(V) == 0:
        return 0.0
    d = V.points - np.asarray(x0, dtype=np.float64)
    return float(-np.sum(V.weights * np.einsum("ij,ij->i", d, V.normals)) / 3.0)


def cvol_upper_bound(volume: float) -> float:
    """``3 (4 pi^2 V)^(1/3)``, the bound on the concentrated volume at surface
    points of quasi-embedded spheres with enclosed volume ``V``."""
    if volume < 0:
        raise NegativeVolume(f"volume must be nonnegative, got {volume}")
    return 3.0 * (4.0 * math.pi**2 * volume) ** (1.0 / 3.0)


# --------------------------------------------------------------------------
# solid regions


@dataclass(frozen=True)
class Ball:
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 1.0

    def sdf(self, x):
        return np.linalg.norm(x - np.asarray(self.center), axis=1) - self.radius

    def bounds(self):
        c = np.asarray(self.center, dtype=float)
        return c - self.radius, c + self.radius

    @property
    def volume(self):
        return 4.0 / 3.0 * math.pi * self.radius**3


@dataclass(frozen=True)
class SolidTorus:
    """Solid torus of tube radius ``r`` around the circle of radius ``1 + r``
    in the plane ``z = center_z``."""

    r: float
    center: tuple = (0.0, 0.0, 0.0)

    def sdf(self, x):
        d = x - np.asarray(self.center)
        q = np.hypot(d[:, 0], d[:, 1]) - (1.0 + self.r)
        return np.hypot(q, d[:, 2]) - self.r

    def bounds(self):
        c = np.asarray(self.center, dtype=float)
        R = 1.0 + 2.0 * self.r
        return c - np.array([R, R, self.r]), c + np.array([R, R, self.r])

    @property
    def volume(self):
        return 2.0 * math.pi**2 * self.r**2 * (1.0 + self.r)


@dataclass(frozen=True)
class CappedCylinderSolid:
    """Solid capsule with axis z, cylinder length ``l`` and radius ``r``."""

    l: float
    r: float
    center: tuple = (0.0, 0.0, 0.0)

    def sdf(self, x):
        d = x - np.asarray(self.center)
        zc = np.clip(d[:, 2], -0.5 * self.l, 0.5 * self.l)
        return np.sqrt(d[:, 0] ** 2 + d[:, 1] ** 2 + (d[:, 2] - zc) ** 2) - self.r

    def bounds(self):
        c = np.asarray(self.center, dtype=float)
        e = np.array([self.r, self.r, self.r + 0.5 * self.l])
        return c - e, c + e

    @property
    def volume(self):
        return math.pi * self.r**2 * self.l + 4.0 / 3.0 * math.pi * self.r**3


@dataclass(frozen=True)
class WeightedUnion:
    """Regions with integer multiplicities; multiplicities add where they overlap."""

    parts: tuple

    def __post_init__(self):
        for _, theta in self.parts:
            if int(theta) != theta or theta < 1:
                raise ValueError("multiplicities must be integers >= 1")

    @property
    def volume(self):
        return sum(theta * reg.volume for reg, theta in self.parts)


def _octree(region, x0, boundary_depth, max_depth, base=24):
    lo, hi = region.bounds()
    side = float(np.max(hi - lo)) * 1.02
    mid = 0.5 * (lo + hi)
    s = side / base
    g = (np.arange(base) + 0.5) * s - 0.5 * side
    cells = np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3) + mid
    total = 0.0
    shell_r = (3.0 / (4.0 * math.pi)) ** (1.0 / 3.0)
    offs = np.array([[i, j, k] for i in (-1, 1) for j in (-1, 1) for k in (-1, 1)], dtype=float)
    level = 0
    while len(cells):
        sd = region.sdf(cells)
        half_diag = 0.5 * math.sqrt(3.0) * s
        outside = sd > half_diag
        inside = sd < -half_diag
        straddle = ~outside & ~inside
        r = np.linalg.norm(cells - x0, axis=1)
        near = r < 2.0 * (2.0 * half_diag)
        split = (~outside) & ((near & (level < max_depth)) | (straddle & (level < boundary_depth)))
        fin = ~outside & ~split
        frac = np.where(inside[fin], 1.0, np.clip(0.5 - sd[fin] / s, 0.0, 1.0))
        rf = r[fin]
        with np.errstate(divide="ignore"):
            val = np.where(rf < half_diag, 4.0 * math.pi * shell_r * s, s**3 / rf**2)
        total += float(np.sum(frac * val))
        s *= 0.5
        cells = (cells[split][:, None, :] + 0.5 * s * offs[None]).reshape(-1, 3)
        level += 1
    return total, level


def concentrated_volume_solid(region, x0, tol: float = 1e-3, *, closed_form: bool = True,
                              boundary_depth: int = 3, max_depth: int = 10) -> ConcVolResult:
    """``int_E Theta(x) / |x - x0|^2 dx`` for a constructive solid.

    Balls with ``x0`` at the centre or on the sphere use the closed forms
    ``4 pi r`` and ``2 pi r``; everything else is integrated on an octree
    refined near ``x0`` (down to ``max_depth``) and across the boundary.
    """
    _check_tol(tol)
    x0 = np.asarray(x0, dtype=np.float64)
    if isinstance(region, WeightedUnion):
        val = err = 0.0
        depth = 0
        routes = set()
        for reg, theta in region.parts:
            res = concentrated_volume_solid(reg, x0, tol, closed_form=closed_form,
                                            boundary_depth=boundary_depth, max_depth=max_depth)
            val += theta * res.value
            err += theta * res.abs_error_est
            depth = max(depth, res.depth)
            routes.add(res.route)
        return ConcVolResult(val, err, depth, "closed-form" if routes == {"closed-form"} else "solid-integral")
    if closed_form and isinstance(region, Ball):
        d = float(np.linalg.norm(x0 - np.asarray(region.center)))
        R = region.radius
        if d <= 1e-12 * R:
            return ConcVolResult(4.0 * math.pi * R, 0.0, 0, "closed-form")
        if abs(d - R) <= 1e-12 * R:
            return ConcVolResult(2.0 * math.pi * R, 0.0, 0, "closed-form")
    fine, depth = _octree(region, x0, boundary_depth, max_depth)
    coarse, _ = _octree(region, x0, boundary_depth - 1, max_depth)
    err = abs(fine - coarse)
    if err > 10 * tol * max(abs(fine), 1e-12) and err > 0.05 * abs(fine):
        raise NonConvergent(f"solid concentrated volume unstable under refinement: {coarse:.6g} vs {fine:.6g}")
    return ConcVolResult(fine, err, depth, "solid-integral")

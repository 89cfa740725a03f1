"""Constructors for the test surfaces and isoperimetric-ratio matching.

All surfaces of revolution use the z axis.  ``resolution`` is the target mean
edge length; edges are shortened where the profile curvature is high (the
catenoid neck) so that every ring resolves its own curvature radius.  At
``resolution=FINE`` the capsule ``(2, 1)`` has roughly 60k faces, the
dumbbell ``(0.05, 0, 1)`` roughly 70k and ``torus(0.5)`` roughly 40k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import bisect

from .errors import BadParams, NeckTooLarge, Unreachable
from .mesh import TriangleImmersion, algebraic_volume, build_immersion, flip_orientation, merge, transform, with_vertices
from .varifold import BoundaryAtoms

FINE = 0.03
DEFAULT_RESOLUTION = 0.05
# fraction of the local curvature radius used as edge length cap
CURVATURE_SPACING = 0.3
NECK_FLOOR = 0.02


# --------------------------------------------------------------------------
# icosphere


def _icosahedron():
    t = (1.0 + math.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    return v / np.linalg.norm(v, axis=1)[:, None], f


def _subdivide_sphere(v, f):
    edges = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    key = np.sort(edges, axis=1)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    inv = inv.ravel()
    mid = v[uniq[:, 0]] + v[uniq[:, 1]]
    mid /= np.linalg.norm(mid, axis=1)[:, None]
    m = len(f)
    idx = len(v) + inv
    ab, bc, ca = idx[:m], idx[m : 2 * m], idx[2 * m :]
    a, b, c = f[:, 0], f[:, 1], f[:, 2]
    nf = np.concatenate(
        [np.stack([a, ab, ca], 1), np.stack([b, bc, ab], 1), np.stack([c, ca, bc], 1), np.stack([ab, bc, ca], 1)]
    )
    return np.concatenate([v, mid]), nf


def _inner(mesh: TriangleImmersion) -> TriangleImmersion:
    return flip_orientation(mesh) if algebraic_volume(mesh) < 0 else mesh


def sphere(r: float = 1.0, subdivisions: int = 4, center=(0.0, 0.0, 0.0)) -> TriangleImmersion:
    """Icosphere of radius ``r`` with inner normals (20 * 4**subdivisions faces)."""
    if not r > 0:
        raise BadParams("sphere radius must be positive")
    if not 0 <= subdivisions <= 7:
        raise BadParams("subdivisions must be in [0, 7]")
    v, f = _icosahedron()
    for _ in range(subdivisions):
        v, f = _subdivide_sphere(v, f)
    mesh = _inner(build_immersion(v, f))
    return transform(mesh, r, center)


def tetrahedron(edge: float = 1.0) -> TriangleImmersion:
    """Regular tetrahedron with inner normals."""
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.float64)
    v *= edge / (2.0 * math.sqrt(2.0))
    f = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
    return _inner(build_immersion(v, f))


def touching_spheres(r: float = 1.0, subdivisions: int = 4) -> TriangleImmersion:
    """Two radius-``r`` spheres centred at ``(0, 0, -r)`` and ``(0, 0, r)``.

    They meet in exactly one point, the origin, which is a vertex of both.
    """
    lower = sphere(r, subdivisions, center=(0.0, 0.0, -r))
    upper = sphere(r, subdivisions, center=(0.0, 0.0, r))
    # icosphere vertices include +-z only after rotation; rotate so a vertex sits on the axis
    return merge(_axis_vertex(lower, (0.0, 0.0, -r), +1), _axis_vertex(upper, (0.0, 0.0, r), -1))


def _axis_vertex(mesh, center, direction):
    """Rotate ``mesh`` about ``center`` so one vertex points along ``direction * z``."""
    c = np.asarray(center)
    v = mesh.vertices - c
    target = np.array([0.0, 0.0, float(direction)])
    # subdivision >= 1 icospheres have a vertex on the x axis
    k = int(np.argmax(v @ np.array([1.0, 0.0, 0.0])))
    src = v[k] / np.linalg.norm(v[k])
    axis = np.cross(src, target)
    s = np.linalg.norm(axis)
    cth = float(src @ target)
    if s < 1e-15:
        R = np.eye(3) if cth > 0 else np.diag([1.0, -1.0, -1.0])
    else:
        axis /= s
        K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
        R = np.eye(3) + s * K + (1 - cth) * K @ K
    w = v @ R.T
    w[k] = target * np.linalg.norm(v[k])
    return with_vertices(mesh, w + c)


# --------------------------------------------------------------------------
# surfaces of revolution


@dataclass(frozen=True)
class _Piece:
    """Profile arc ``t in [0, 1] -> (rho, z)`` with an abs-curvature bound."""

    point: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    curvature: Callable[[np.ndarray], np.ndarray]


def _arc(center_z, R, psi0, psi1):
    """Circle arc ``(R sin psi, center_z + R cos psi)`` for psi from psi0 to psi1."""

    def point(t):
        psi = psi0 + (psi1 - psi0) * t
        return R * np.sin(psi), center_z + R * np.cos(psi)

    return _Piece(point, lambda t: np.full_like(t, 1.0 / R))


def _segment(rho0, z0, rho1, z1, kappa):
    def point(t):
        return rho0 + (rho1 - rho0) * t, z0 + (z1 - z0) * t

    return _Piece(point, lambda t: np.full_like(t, kappa))


def _catenoid(a, z0, z1):
    def point(t):
        z = z0 + (z1 - z0) * t
        return a * np.cosh(z / a), z

    return _Piece(point, lambda t: 1.0 / (a * np.cosh((z0 + (z1 - z0) * t) / a) ** 2))


def _sample_piece(piece: _Piece, h: float, dense: int = 4000):
    t = np.linspace(0.0, 1.0, dense + 1)
    rho, z = piece.point(t)
    ds = np.hypot(np.diff(rho), np.diff(z))
    kap = piece.curvature(0.5 * (t[1:] + t[:-1]))
    h_loc = np.minimum(h, CURVATURE_SPACING / np.maximum(kap, 1e-300))
    u = np.concatenate([[0.0], np.cumsum(ds / h_loc)])
    n = max(1, int(round(u[-1])))
    tt = np.interp(np.linspace(0.0, u[-1], n + 1), u, t)
    rr, zz = piece.point(tt)
    kk = piece.curvature(tt)
    hh = np.minimum(h, CURVATURE_SPACING / np.maximum(kk, 1e-300))
    return np.asarray(rr, dtype=float), np.asarray(zz, dtype=float), hh


def _profile(pieces, h, closed=False):
    rho, z, hl = [], [], []
    for i, p in enumerate(pieces):
        r_, z_, h_ = _sample_piece(p, h)
        s = 0 if i == 0 else 1
        rho.append(r_[s:])
        z.append(z_[s:])
        hl.append(h_[s:])
    rho, z, hl = np.concatenate(rho), np.concatenate(z), np.concatenate(hl)
    if closed:
        rho, z, hl = rho[:-1], z[:-1], hl[:-1]
    rho[np.abs(rho) < 1e-12] = 0.0
    return rho, z, hl


def _zipper(ring_a, ang_a, ring_b, ang_b):
    na, nb = len(ring_a), len(ring_b)
    tris = []
    if na == 1:
        for j in range(nb):
            tris.append((ring_a[0], ring_b[(j + 1) % nb], ring_b[j]))
        return tris
    if nb == 1:
        for i in range(na):
            tris.append((ring_a[i], ring_a[(i + 1) % na], ring_b[0]))
        return tris
    ea = np.append(ang_a, ang_a[0] + 2 * np.pi)
    eb = np.append(ang_b, ang_b[0] + 2 * np.pi)
    i = j = 0
    while i < na or j < nb:
        if j == nb or (i < na and ea[i + 1] < eb[j + 1]):
            tris.append((ring_a[i % na], ring_a[(i + 1) % na], ring_b[j % nb]))
            i += 1
        else:
            tris.append((ring_a[i % na], ring_b[(j + 1) % nb], ring_b[j % nb]))
            j += 1
    return tris


def revolve(rho, z, h_ring, closed: bool = False) -> TriangleImmersion:
    """Mesh the surface of revolution of a profile about the z axis.

    Profile points with ``rho == 0`` become single pole vertices; ring sizes
    follow ``2 pi rho / h_ring``.  Returned with inner normals.
    """
    verts, rings, angles = [], [], []
    count = 0
    for k, (r_, z_, h_) in enumerate(zip(rho, z, h_ring)):
        if r_ == 0.0:
            n = 1
        else:
            n = max(3, int(round(2 * np.pi * r_ / h_)))
        off = 0.5 * (k % 2)
        th = 2 * np.pi * (np.arange(n) + off) / n
        if n == 1:
            verts.append(np.array([[0.0, 0.0, z_]]))
        else:
            verts.append(np.stack([r_ * np.cos(th), r_ * np.sin(th), np.full(n, z_)], axis=1))
        rings.append(np.arange(count, count + n))
        angles.append(th)
        count += n
    tris = []
    nr = len(rings)
    last = nr if closed else nr - 1
    for k in range(last):
        k2 = (k + 1) % nr
        tris.extend(_zipper(rings[k], angles[k], rings[k2], angles[k2]))
    mesh = build_immersion(np.concatenate(verts), np.array(tris, dtype=np.int64))
    return _inner(mesh)


def _revolved_area_volume(rho, z, closed=False):
    if closed:
        rho = np.append(rho, rho[0])
        z = np.append(z, z[0])
    r1, r2 = rho[:-1], rho[1:]
    dz = np.diff(z)
    area = np.pi * np.sum((r1 + r2) * np.hypot(np.diff(rho), dz))
    vol = np.pi / 3.0 * np.sum(dz * (r1 * r1 + r1 * r2 + r2 * r2))
    return float(area), float(abs(vol))


def _capsule_pieces(l, r, z_bottom_center=None):
    zc = -0.5 * l if z_bottom_center is None else z_bottom_center
    return [
        _arc(zc, r, np.pi, 0.5 * np.pi),
        _segment(r, zc, r, zc + l, 1.0 / r),
        _arc(zc + l, r, 0.5 * np.pi, 0.0),
    ]


def capped_cylinder(l: float, r: float, resolution: float = DEFAULT_RESOLUTION) -> TriangleImmersion:
    """Capsule: cylinder of length ``l`` and radius ``r`` closed by hemispheres.

    Centred at the origin, axis z; ``l = 0`` gives a round sphere of radius r.
    """
    if l < 0 or not r > 0:
        raise BadParams("capped_cylinder needs l >= 0 and r > 0")
    pieces = _capsule_pieces(l, r)
    if l == 0:
        pieces = [pieces[0], pieces[2]]
    rho, z, h = _profile(pieces, resolution)
    return revolve(rho, z, h)


def _neck_junction(a, R):
    """Tangent junction of ``rho = a cosh(z/a)`` with a sphere of radius R.

    Returns ``(t, phi, offset)``: the catenoid meets the sphere at
    ``|z| = a t``, the sphere polar angle (from its pole facing the neck) is
    ``phi``, and the sphere centre sits at distance ``offset`` from the waist.
    """
    t = math.acosh(math.sqrt(R / a))
    phi = math.asin(1.0 / math.cosh(t))
    offset = R * math.cos(phi) + a * t
    return t, phi, offset


def _dumbbell_pieces(a, l, r):
    if not (0 < a < min(1.0, r) / 4.0):
        raise NeckTooLarge(f"neck size a={a} must satisfy 0 < a < min(1, r)/4 = {min(1.0, r) / 4.0}")
    if l < 0 or not (0 < r <= 1.0):
        raise BadParams("dumbbell needs l >= 0 and 0 < r <= 1")
    t1, phi1, off1 = _neck_junction(a, 1.0)
    t2, phi2, off2 = _neck_junction(a, r)
    zc1 = -off1  # centre of the capsule's upper cap
    zc0 = zc1 - l  # centre of its lower cap
    zc2 = off2
    pieces = [_arc(zc0, 1.0, np.pi, 0.5 * np.pi)]
    if l > 0:
        pieces.append(_segment(1.0, zc0, 1.0, zc1, 1.0))
    pieces.append(_arc(zc1, 1.0, 0.5 * np.pi, phi1))
    pieces.append(_catenoid(a, -a * t1, a * t2))
    pieces.append(_arc(zc2, r, np.pi - phi2, 0.0))
    return pieces


def dumbbell(a: float, l: float, r: float, resolution: float = DEFAULT_RESOLUTION) -> TriangleImmersion:
    """Capsule of radius 1 and length ``l`` joined to a sphere of radius ``r``
    by a catenoidal neck ``rho = a cosh(z/a)`` with waist at the origin.

    The neck meets both bodies tangentially (exact C^1 junction), so no
    fairing of the junction rings is needed.
    """
    rho, z, h = _profile(_dumbbell_pieces(a, l, r), resolution)
    return revolve(rho, z, h)


def isoperimetric_ratio_dumbbell(a: float, l: float, r: float, samples: int = 20000) -> float:
    """``A**3 / V**2`` of the dumbbell, from a dense revolved profile."""
    pieces = _dumbbell_pieces(a, l, r)
    rho, z = [], []
    for i, p in enumerate(pieces):
        rr, zz = p.point(np.linspace(0.0, 1.0, samples + 1))
        s = 0 if i == 0 else 1
        rho.append(np.asarray(rr)[s:])
        z.append(np.asarray(zz)[s:])
    area, vol = _revolved_area_volume(np.concatenate(rho), np.concatenate(z))
    return area**3 / vol**2


def torus(r: float, resolution: float = DEFAULT_RESOLUTION) -> TriangleImmersion:
    """Torus from revolving the circle of radius ``r`` centred at ``(1 + r, 0)``."""
    if not r > 0:
        raise BadParams("torus tube radius must be positive")
    R = 1.0 + r

    def point(t):
        th = 2 * np.pi * t
        return R + r * np.cos(th), r * np.sin(th)

    piece = _Piece(point, lambda t: np.full_like(t, 1.0 / r))
    rho, z, h = _profile([piece], resolution, closed=True)
    return revolve(rho, z, h, closed=True)


def sphere_torus_mixed(r: float, resolution: float = DEFAULT_RESOLUTION, subdivisions: int = 4) -> TriangleImmersion:
    """Unit sphere with *outer* normals together with ``torus(r)`` (inner normals)."""
    return merge(flip_orientation(sphere(1.0, subdivisions)), torus(r, resolution))


def sphere_torus_volume(r: float) -> float:
    """Closed-form algebraic volume of :func:`sphere_torus_mixed`."""
    return -4.0 * math.pi / 3.0 + 2.0 * math.pi**2 * r * r * (1.0 + r)


def sphere_torus_root(xtol: float = 1e-9) -> float:
    """Tube radius at which the mixed sphere/torus has zero algebraic volume."""
    return bisect(sphere_torus_volume, 1e-3, 1.0, xtol=xtol)


def lens(resolution: float = DEFAULT_RESOLUTION, boundary_atoms: int | None = None):
    """Two unit-sphere caps of opening angle pi/3 glued along z = 0.

    Returns ``(mesh, beta)`` where ``beta`` discretises sqrt(3) times length
    measure on the crease circle of radius sqrt(3)/2, with direction
    ``x / |x|``.
    """
    alpha = np.pi / 3.0
    a = math.sin(alpha)
    pieces = [_arc(0.5, 1.0, np.pi, np.pi - alpha), _arc(-0.5, 1.0, alpha, 0.0)]
    rho, z, h = _profile(pieces, resolution)
    mesh = revolve(rho, z, h)
    n = boundary_atoms or max(64, int(round(2 * np.pi * a / (0.25 * resolution))))
    th = 2 * np.pi * (np.arange(n) + 0.5) / n
    pts = np.stack([a * np.cos(th), a * np.sin(th), np.zeros(n)], axis=1)
    eta = pts / a
    w = np.full(n, math.sqrt(3.0) * 2 * np.pi * a / n)
    return mesh, BoundaryAtoms(pts, eta, w)


# --------------------------------------------------------------------------
# isoperimetric matching


def match_isoperimetric(I_target: float, tol: float = 1e-4, a: float = NECK_FLOOR):
    """Dumbbell parameters ``(a, l, r)`` with isoperimetric ratio ``I_target``.

    The neck stays at ``a``.  When ``I(a, 0, 1)`` exceeds the target the
    small sphere shrinks (bisection on ``r``), otherwise the capsule grows
    (bisection on ``l``).  Raises :class:`Unreachable` when no bracket exists.
    """
    if not I_target >= 36 * np.pi:
        raise Unreachable(f"I_target={I_target:.6g} is below the isoperimetric bound 36*pi")
    if not 0.02 <= a <= 0.2:
        raise Unreachable("neck size must lie in [0.02, 0.2]")
    f = isoperimetric_ratio_dumbbell
    base = f(a, 0.0, 1.0)
    xtol = 1e-12
    if abs(base - I_target) <= tol * I_target:
        return a, 0.0, 1.0
    if base > I_target:
        r_lo = 4.0 * a * (1.0 + 1e-9)
        if f(a, 0.0, r_lo) > I_target:
            raise Unreachable(f"I_target={I_target:.6g} below the dumbbell range reachable with neck a={a}")
        r = bisect(lambda r: f(a, 0.0, r) - I_target, r_lo, 1.0, xtol=xtol)
        return a, 0.0, float(r)
    l_hi = 1.0
    while f(a, l_hi, 1.0) < I_target:
        l_hi *= 2.0
        if l_hi > 1e3:
            raise Unreachable(f"I_target={I_target:.6g} needs an unreasonably long capsule")
    l = bisect(lambda l: f(a, l, 1.0) - I_target, 0.0, l_hi, xtol=xtol)
    return a, float(l), 1.0


SHAPES = {
    "sphere": sphere,
    "tetrahedron": tetrahedron,
    "touching_spheres": touching_spheres,
    "capped_cylinder": capped_cylinder,
    "dumbbell": dumbbell,
    "torus": torus,
    "sphere_torus_mixed": sphere_torus_mixed,
    "lens": lens,
}

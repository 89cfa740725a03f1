"""Li-Yau type multiplicity bounds and the inequalities derived from them."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .concvol import concentrated_volume
from .errors import (
    IsoperimetricViolation,
    NonNegativeC0,
    PointOnBoundary,
    PositiveC0,
    RhoBelowResolution,
    ZeroEnergy,
)
from .functionals import cmc_deficit, helfrich_energy, total_mean_curvature
from .mesh import (
    TriangleImmersion,
    algebraic_volume,
    diameter,
    flip_orientation,
    multiplicity_at,
    total_area,
)
from .varifold import BoundaryAtoms

SLACK = 0.05
STRADDLE_DEPTH = 6
N_PROBES = 64
ZERO_ENERGY = 1e-2


def _floats(x):
    return [float(v) for v in np.asarray(x).ravel()]


@dataclass
class LiYauCertificate:
    x0: list
    components: dict
    bound: float
    multiplicity_bound: int
    measured_multiplicity: int
    verdict: str
    slack: float = SLACK
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "x0": self.x0,
            "components": self.components,
            "bound": self.bound,
            "multiplicity_bound": self.multiplicity_bound,
            "measured": self.measured_multiplicity,
            "verdict": self.verdict,
        }
        d.update(self.extra)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _certificate(x0, components, measured, slack, extra=None):
    bound = float(sum(components.values()))
    return LiYauCertificate(
        x0=_floats(x0),
        components={k: float(v) for k, v in components.items()},
        bound=bound,
        multiplicity_bound=int(math.floor(bound + slack)),
        measured_multiplicity=int(measured),
        verdict="violated" if measured > bound + slack else "consistent",
        slack=slack,
        extra=extra or {},
    )


def boundary_term(beta: BoundaryAtoms | None, x0) -> float:
    """``(1 / 2 pi) * sum w <x - x0, eta> / |x - x0|^2`` over boundary atoms."""
    if beta is None or len(beta) == 0:
        return 0.0
    d = beta.points - np.asarray(x0, dtype=np.float64)
    r2 = np.einsum("ij,ij->i", d, d)
    if r2.min() <= 1e-18:
        raise PointOnBoundary("x0 coincides with a boundary atom")
    num = np.einsum("ij,ij->i", d, beta.directions)
    return float(np.sum(beta.weights * num / r2) / (2.0 * math.pi))


def liyau_bound(mesh: TriangleImmersion, c0: float, x0, tol: float = 1e-4, beta: BoundaryAtoms | None = None,
                eps: float | None = None, slack: float = SLACK) -> LiYauCertificate:
    """Upper bound on the number of sheets through ``x0``:
    ``H_c0 / 4 pi + (c0 / 2 pi) V_c(x0) + boundary term``."""
    vc = concentrated_volume(mesh, x0, tol)
    components = {
        "density_at_infinity": 0.0,
        "helfrich_over_4pi": helfrich_energy(mesh, c0) / (4.0 * math.pi),
        "cvol_term": c0 / (2.0 * math.pi) * vc.value,
        "boundary_term": boundary_term(beta, x0),
    }
    m = multiplicity_at(mesh, x0, eps)
    return _certificate(x0, components, m, slack, {"c0": float(c0), "concentrated_volume": vc.value})


def optimal_c0(mesh: TriangleImmersion, vc: float) -> float:
    """Minimiser over ``c0`` of the Li-Yau bound: ``(int H_sc - 4 V_c) / A``."""
    return (2.0 * total_mean_curvature(mesh) - 4.0 * vc) / total_area(mesh)


def scale_invariant_bound(mesh: TriangleImmersion, x0, tol: float = 1e-4, eps: float | None = None,
                          slack: float = SLACK) -> LiYauCertificate:
    """The Li-Yau bound minimised over ``c0``; unchanged by scaling and by
    reversing the orientation."""
    vc = concentrated_volume(mesh, x0, tol).value
    deficit, hbar = cmc_deficit(mesh)
    A = total_area(mesh)
    components = {
        "cmc_deficit_over_4pi": deficit / (4.0 * math.pi),
        "mean_curvature_term": hbar * vc / (2.0 * math.pi),
        "cvol_square_term": -vc**2 / (math.pi * A),
    }
    c_star = optimal_c0(mesh, vc)
    at_star = helfrich_energy(mesh, c_star) / (4.0 * math.pi) + c_star * vc / (2.0 * math.pi)
    m = multiplicity_at(mesh, x0, eps)
    extra = {"optimal_c0": c_star, "bound_at_optimal_c0": at_star, "concentrated_volume": vc}
    return _certificate(x0, components, m, slack, extra)


# --------------------------------------------------------------------------
# monotonicity


@dataclass
class MonotonicityProfile:
    rhos: np.ndarray
    gamma: np.ndarray
    terms: np.ndarray  # (n, 5)
    boundary: np.ndarray
    x0: np.ndarray
    c0: float

    def rows(self):
        for r, g, t in zip(self.rhos, self.gamma, self.terms):
            yield (float(r), float(g), *map(float, t))

    def is_nondecreasing(self, rel_slack: float = 1e-3) -> bool:
        scale = float(np.max(np.abs(self.gamma)))
        return bool(np.all(np.diff(self.gamma) >= -rel_slack * scale))


_BARY = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])


def _face_sums(tri, Hc, n, x0, c0):
    """Per-triangle integrals of the five monotonicity integrands, (k, 5)."""
    area = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    pts = np.einsum("qk,mkd->mqd", _BARY, tri)
    H = np.einsum("qk,mkd->mqd", _BARY, Hc)
    d = pts - x0
    r2 = np.einsum("mqd,mqd->mq", d, d)
    dn = np.einsum("mqd,md->mq", d, n)
    G = H - c0 * n[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        conc = np.where(r2 > 0, dn / r2, 0.0)
    w = area[:, None] / 3.0
    out = np.empty((len(tri), 5))
    out[:, 0] = area
    out[:, 1] = np.sum(w * np.einsum("mqd,mqd->mq", G, G), axis=1)
    out[:, 2] = np.sum(w * conc, axis=1)
    out[:, 3] = np.sum(w * np.einsum("mqd,mqd->mq", d, G), axis=1)
    out[:, 4] = np.sum(w * dn, axis=1)
    return out


def _split(tri, Hc, n):
    def kids(p):
        a, b, c = p[:, 0], p[:, 1], p[:, 2]
        ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
        return np.concatenate([np.stack(s, 1) for s in ([a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca])])

    return kids(tri), kids(Hc), np.tile(n, (4, 1))


def _ball_sums(tri, Hc, n, x0, c0, rho, depth=STRADDLE_DEPTH):
    """Integrals over the part of the surface inside ``B_rho(x0)``; triangles
    crossing the sphere are subdivided and finally classified by centroid."""
    total = np.zeros(5)
    for level in range(depth + 1):
        if len(tri) == 0:
            break
        dist = np.linalg.norm(tri - x0, axis=2)
        cen = tri.mean(axis=1)
        rc = np.linalg.norm(cen - x0, axis=1)
        bound = np.linalg.norm(tri - cen[:, None, :], axis=2).max(axis=1)
        inside = dist.max(axis=1) <= rho
        outside = rc - bound > rho
        cross = ~inside & ~outside
        if level == depth:
            inside = inside | (cross & (rc <= rho))
            cross[:] = False
        if inside.any():
            total += _face_sums(tri[inside], Hc[inside], n[inside], x0, c0).sum(axis=0)
        tri, Hc, n = _split(tri[cross], Hc[cross], n[cross])
    return total


def local_edge_length(mesh: TriangleImmersion, x0, k: int = 12) -> float:
    """Mean edge length of the ``k`` faces whose centroids are closest to ``x0``."""
    d = np.linalg.norm(mesh.face_centroids - np.asarray(x0, dtype=np.float64), axis=1)
    idx = np.argsort(d, kind="stable")[: min(k, mesh.n_faces)]
    tri = mesh.corners[idx]
    e = np.linalg.norm(tri - np.roll(tri, 1, axis=1), axis=2)
    return float(e.mean())


def monotonicity_profile(mesh: TriangleImmersion, c0: float, x0, rhos, beta: BoundaryAtoms | None = None) -> MonotonicityProfile:
    """``gamma(rho)`` at each radius, with its five ball integrals broken out."""
    rhos = np.asarray(rhos, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    if rhos.ndim != 1 or len(rhos) == 0 or np.any(np.diff(rhos) <= 0):
        raise ValueError("rhos must be a nonempty ascending sequence")
    floor = 3.0 * local_edge_length(mesh, x0)
    if rhos[0] < floor * (1 - 1e-12):
        raise RhoBelowResolution(f"rho={rhos[0]:.4g} is below three local edge lengths ({floor:.4g})")
    tri = mesh.corners
    Hc = mesh.curvature.H[mesh.faces]
    n = mesh.face_normals
    terms = np.empty((len(rhos), 5))
    bterm = np.zeros(len(rhos))
    for i, rho in enumerate(rhos):
        s = _ball_sums(tri, Hc, n, x0, c0, rho)
        terms[i] = [
            s[0] / rho**2,
            s[1] / 16.0,
            -0.5 * c0 * s[2],
            s[3] / (2.0 * rho**2),
            c0 * s[4] / (2.0 * rho**2),
        ]
        if beta is not None and len(beta):
            d = beta.points - x0
            r = np.linalg.norm(d, axis=1)
            m = r <= rho
            if np.any(r[m] <= 1e-9):
                raise PointOnBoundary("x0 coincides with a boundary atom")
            num = np.einsum("ij,ij->i", d[m], beta.directions[m])
            bterm[i] = 0.5 * np.sum(beta.weights[m] * (1.0 / r[m] ** 2 - 1.0 / rho**2) * num)
    gamma = terms.sum(axis=1) + bterm
    return MonotonicityProfile(rhos, gamma, terms, bterm, x0, float(c0))


# --------------------------------------------------------------------------
# certificates over probe points


def vertex_density(mesh: TriangleImmersion, radius: float | None = None) -> np.ndarray:
    """``mu(B_radius(v)) / (pi radius^2)`` at every vertex, with face areas
    lumped at centroids."""
    if radius is None:
        radius = 3.0 * mesh.mean_edge_length
    vt = cKDTree(mesh.vertices)
    ct = cKDTree(mesh.face_centroids)
    M = vt.sparse_distance_matrix(ct, radius, output_type="coo_matrix")
    # sparse_distance_matrix drops exact zero distances; a centroid never coincides with a vertex
    mu = np.bincount(M.row, weights=mesh.face_areas[M.col], minlength=mesh.n_vertices)
    return mu / (math.pi * radius**2)


def probe_points(mesh: TriangleImmersion, k: int = N_PROBES) -> np.ndarray:
    """Indices of the ``k`` vertices of highest local density."""
    dens = vertex_density(mesh)
    return np.argsort(-dens, kind="stable")[: min(k, mesh.n_vertices)]


@dataclass
class EmbeddednessCertificate:
    verdict: str
    energy: float
    threshold: float
    worst_x0: list
    worst_multiplicity: int
    n_probes: int

    def to_dict(self):
        return asdict(self)


def embeddedness_certificate(mesh: TriangleImmersion, c0: float, tol: float = 0.01, n_probes: int = N_PROBES,
                             eps: float | None = None, slack: float = SLACK) -> EmbeddednessCertificate:
    """Certify embeddedness from ``H_c0 < 8 pi`` for ``c0 <= 0``.

    Verdict is ``embedded-certified`` when the energy is below ``8 pi (1 - tol)``
    and every probe shows a single sheet, ``violated`` when some probe shows
    more sheets than ``H_c0 / 4 pi`` allows, and ``inconclusive`` otherwise.
    """
    if c0 > 0:
        raise PositiveC0(f"embeddedness from the energy needs c0 <= 0, got {c0}")
    energy = helfrich_energy(mesh, c0)
    threshold = 8.0 * math.pi * (1.0 - tol)
    idx = probe_points(mesh, n_probes)
    mult = np.array([multiplicity_at(mesh, mesh.vertices[i], eps) for i in idx])
    worst = int(np.argmax(mult))
    if mult.max() > energy / (4.0 * math.pi) + slack:
        verdict = "violated"
    elif energy < threshold and mult.max() <= 1:
        verdict = "embedded-certified"
    else:
        verdict = "inconclusive"
    return EmbeddednessCertificate(verdict, energy, threshold, _floats(mesh.vertices[idx[worst]]), int(mult[worst]), len(idx))


# --------------------------------------------------------------------------
# derived inequalities


@dataclass
class DiameterBounds:
    lower: float
    upper: float | None
    measured: float
    lower_ok: bool
    upper_ok: bool | None

    def to_dict(self):
        return asdict(self)


def diameter_bounds(mesh: TriangleImmersion, c0: float, slack: float = 0.02, zero_tol: float = ZERO_ENERGY) -> DiameterBounds:
    """Diameter sandwich from energy, area and algebraic volume.

    lower: ``|2A - 3 c0 V| / (2 sqrt(A H_c0))``;
    upper (only for ``c0 <= 0`` and ``V > 0``): ``(9 / 2 pi) sqrt(H_c0 (A + (2/3)|c0| V))``.
    """
    energy = helfrich_energy(mesh, c0)
    if energy <= zero_tol:
        raise ZeroEnergy(f"H_c0 = {energy:.3g} is numerically zero; the bounds degenerate")
    A = total_area(mesh)
    V = algebraic_volume(mesh)
    D = diameter(mesh)
    lower = abs(2.0 * A - 3.0 * c0 * V) / (2.0 * math.sqrt(A * energy))
    upper = None
    if c0 <= 0 and V > 0:
        upper = 9.0 / (2.0 * math.pi) * math.sqrt(energy * (A + 2.0 / 3.0 * abs(c0) * V))
    return DiameterBounds(
        lower=lower,
        upper=upper,
        measured=D,
        lower_ok=lower <= D * (1.0 + slack),
        upper_ok=None if upper is None else D <= upper * (1.0 + slack),
    )


def helfrich_lower_bound_check(mesh: TriangleImmersion, c0: float, slack: float = 0.02) -> tuple[float, bool]:
    """``(H_c0, H_c0 > 4 pi (1 - slack))`` for ``c0 < 0``."""
    if c0 >= 0:
        raise NonNegativeC0(f"the 4 pi lower bound needs c0 < 0, got {c0}")
    if algebraic_volume(mesh) <= 0:
        raise ValueError("the 4 pi lower bound needs positive algebraic volume")
    energy = helfrich_energy(mesh, c0)
    return energy, energy > 4.0 * math.pi * (1.0 - slack)


@dataclass
class GammaThreshold:
    gamma: float
    threshold: float
    L: float | None

    def to_dict(self):
        return asdict(self)


def gamma_threshold(c0: float, A0: float, V0: float) -> GammaThreshold:
    """Energy gap ``Gamma(c0, A0, V0)`` and the certified threshold ``8 pi + Gamma``."""
    if not (A0 > 0 and V0 > 0):
        raise IsoperimetricViolation("A0 and V0 must be positive")
    if 36.0 * math.pi * V0**2 > A0**3 * (1.0 + 1e-12):
        raise IsoperimetricViolation(f"36 pi V0^2 = {36 * math.pi * V0**2:.6g} exceeds A0^3 = {A0**3:.6g}")
    if c0 < 0:
        L = abs(c0) * V0 / (2.0 * 81.0 * (A0 + 2.0 / 3.0 * abs(c0) * V0))
        gamma = 4.0 * math.pi * (math.sqrt(1.0 + L) - 1.0)
    else:
        L = None
        gamma = 0.0 if c0 == 0 else -6.0 * c0 * (4.0 * math.pi**2 * V0) ** (1.0 / 3.0)
    return GammaThreshold(gamma, 8.0 * math.pi + gamma, L)


@dataclass
class MinkowskiCheck:
    lhs: float
    rhs: float | None
    applicable: bool
    passes: bool | None
    multiplicity: int
    concentrated_volume: float
    cmc_deficit: float

    def to_dict(self):
        return asdict(self)


def minkowski_check(mesh: TriangleImmersion, x0, tol: float = 0.01, eps: float | None = None,
                    cvol_tol: float = 1e-4) -> MinkowskiCheck:
    """``(1/2) int H_sc >= sqrt((4 pi m - H_bar) A)``, applicable when
    ``V_c(x0) > 0`` and the CMC deficit ``H_bar <= 4 pi m``."""
    vc = concentrated_volume(mesh, x0, cvol_tol).value
    m = multiplicity_at(mesh, x0, eps)
    deficit, _ = cmc_deficit(mesh)
    lhs = total_mean_curvature(mesh)
    applicable = vc > 0 and deficit <= 4.0 * math.pi * m
    if not applicable:
        return MinkowskiCheck(lhs, None, False, None, m, vc, deficit)
    rhs = math.sqrt((4.0 * math.pi * m - deficit) * total_area(mesh))
    return MinkowskiCheck(lhs, rhs, True, lhs >= rhs * (1.0 - tol), m, vc, deficit)


def reversed_mesh(mesh: TriangleImmersion) -> TriangleImmersion:
    return flip_orientation(mesh)

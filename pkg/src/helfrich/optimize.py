"""Desk-scale constrained Helfrich minimisation.

Projected gradient descent on vertex positions with hard area/volume
constraints restored after every step, plus an embeddedness monitor.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from .errors import IsoperimetricViolation, MonitorAlarm, NumericalError, ProjectionDiverged
from .functionals import helfrich_energy, penalized_energy
from .liyau import liyau_bound, probe_points
from .mesh import TriangleImmersion, algebraic_volume, mean_curvature, total_area, with_vertices
from .meshio import fmt, write_csv, write_obj

log = logging.getLogger(__name__)

FD_REL_STEP = 1e-5
CONSTRAINT_TOL = 1e-6


# --------------------------------------------------------------------------
# energy gradient


def vertex_energies(mesh: TriangleImmersion, c0: float) -> np.ndarray:
    """``(1/4) A_i (H_sc,i - c0)^2``; each entry depends only on the closed
    one-ring of vertex ``i``."""
    c = mean_curvature(mesh)
    return 0.25 * c.area * (c.H_sc - c0) ** 2


def distance2_coloring(mesh: TriangleImmersion) -> np.ndarray:
    """Greedy colouring in which vertices of one colour are at graph distance
    at least 3, so their closed one-rings are disjoint."""
    A = mesh.vertex_adjacency.astype(bool) + sparse.identity(mesh.n_vertices, dtype=bool, format="csr")
    A2 = (A @ A).tocsr()
    colors = np.full(mesh.n_vertices, -1)
    for v in range(mesh.n_vertices):
        nb = A2.indices[A2.indptr[v] : A2.indptr[v + 1]]
        used = set(colors[nb].tolist())
        c = 0
        while c in used:
            c += 1
        colors[v] = c
    return colors


def _closed_ring_owner(mesh: TriangleImmersion, members: np.ndarray) -> np.ndarray:
    """For every vertex, the member of ``members`` whose closed one-ring
    contains it, or -1."""
    A = mesh.vertex_adjacency.tocsr()
    owner = np.full(mesh.n_vertices, -1)
    owner[members] = members
    for v in members:
        owner[A.indices[A.indptr[v] : A.indptr[v + 1]]] = v
    return owner


def discrete_gradient(mesh: TriangleImmersion, c0: float, h: float | None = None, colors=None) -> np.ndarray:
    """Central finite-difference gradient of the Helfrich energy, shape (n, 3).

    All vertices of one distance-2 colour class are displaced together; since
    their one-rings are disjoint, the change of each vertex energy can be
    attributed to exactly one displaced vertex and the result equals the
    vertex-by-vertex difference quotient.
    """
    if h is None:
        h = FD_REL_STEP * mesh.mean_edge_length
    if colors is None:
        colors = distance2_coloring(mesh)
    x = np.array(mesh.vertices)
    n = mesh.n_vertices
    grad = np.zeros((n, 3))
    for c in range(int(colors.max()) + 1):
        members = np.flatnonzero(colors == c)
        owner = _closed_ring_owner(mesh, members)
        hit = owner >= 0
        for k in range(3):
            xp = x.copy()
            xp[members, k] += h
            xm = x.copy()
            xm[members, k] -= h
            diff = vertex_energies(with_vertices(mesh, xp), c0) - vertex_energies(with_vertices(mesh, xm), c0)
            grad[:, k] += np.bincount(owner[hit], weights=diff[hit], minlength=n) / (2.0 * h)
    return grad


def brute_force_gradient(mesh: TriangleImmersion, c0: float, h: float | None = None) -> np.ndarray:
    """One global energy pair per coordinate; slow reference for tests."""
    if h is None:
        h = FD_REL_STEP * mesh.mean_edge_length
    x = np.array(mesh.vertices)
    grad = np.zeros_like(x)
    for i in range(len(x)):
        for k in range(3):
            x[i, k] += h
            ep = helfrich_energy(with_vertices(mesh, x), c0)
            x[i, k] -= 2 * h
            em = helfrich_energy(with_vertices(mesh, x), c0)
            x[i, k] += h
            grad[i, k] = (ep - em) / (2.0 * h)
    return grad


def area_gradient(mesh: TriangleImmersion) -> np.ndarray:
    """Exact gradient of the total area."""
    p = mesh.corners
    n = mesh.face_normals
    g = np.zeros((mesh.n_vertices, 3))
    for c in range(3):
        b, d = p[:, (c + 1) % 3], p[:, (c + 2) % 3]
        gc = 0.5 * np.cross(n, d - b)
        for k in range(3):
            g[:, k] += np.bincount(mesh.faces[:, c], weights=gc[:, k], minlength=mesh.n_vertices)
    return g


def volume_gradient(mesh: TriangleImmersion) -> np.ndarray:
    """Exact gradient of the algebraic volume ``-(1/6) sum det(a, b, c)``."""
    p = mesh.corners
    g = np.zeros((mesh.n_vertices, 3))
    for c in range(3):
        b, d = p[:, (c + 1) % 3], p[:, (c + 2) % 3]
        gc = -np.cross(b, d) / 6.0
        for k in range(3):
            g[:, k] += np.bincount(mesh.faces[:, c], weights=gc[:, k], minlength=mesh.n_vertices)
    return g


# --------------------------------------------------------------------------
# constraints


def check_targets(A0: float, V0: float) -> None:
    if not (A0 > 0 and V0 > 0):
        raise IsoperimetricViolation("A0 and V0 must be positive")
    if 36.0 * math.pi * V0**2 > A0**3 * (1.0 + 1e-9):
        raise IsoperimetricViolation(f"targets violate the isoperimetric inequality: 36 pi V0^2 > A0^3 (A0={A0}, V0={V0})")


def _residuals(mesh, A0, V0):
    return abs(total_area(mesh) - A0) / A0, abs(algebraic_volume(mesh) - V0) / V0


def project_constraints(mesh: TriangleImmersion, A0: float, V0: float, tol: float = CONSTRAINT_TOL,
                        max_iter: int = 500) -> TriangleImmersion:
    """Restore ``area = A0`` and ``volume = V0``.

    Each round rescales about the centroid to hit the area exactly, then takes
    a Newton step for the volume along the volume gradient made orthogonal to
    the area gradient.
    """
    check_targets(A0, V0)
    x = np.array(mesh.vertices)
    for _ in range(max_iter):
        m = with_vertices(mesh, x)
        A = total_area(m)
        cen = x.mean(axis=0)
        x = cen + (x - cen) * math.sqrt(A0 / A)
        m = with_vertices(mesh, x)
        rA, rV = _residuals(m, A0, V0)
        if rA <= tol and rV <= tol:
            return m
        gA, gV = area_gradient(m), volume_gradient(m)
        d = gV - (np.vdot(gV, gA) / np.vdot(gA, gA)) * gA
        slope = np.vdot(gV, d)
        if not slope > 0:
            break
        t = (V0 - algebraic_volume(m)) / slope
        # keep each correction below a fraction of an edge
        limit = 0.25 * m.mean_edge_length / max(np.abs(d).max(), 1e-300)
        x = x + np.clip(t, -limit, limit) * d
    m = with_vertices(mesh, x)
    rA, rV = _residuals(m, A0, V0)
    if rA <= tol and rV <= tol:
        return m
    raise ProjectionDiverged(f"constraint projection stalled at relative residuals area {rA:.2e}, volume {rV:.2e}")


def isoperimetric_floor(mesh: TriangleImmersion) -> float:
    """``A^3 / V^2`` of the mesh with its vertices pushed radially onto a sphere
    about the centroid: the roundest shape this connectivity can take without
    moving vertices tangentially.  Always above ``36 pi``."""
    x = mesh.vertices - mesh.vertices.mean(axis=0)
    s = with_vertices(mesh, x / np.linalg.norm(x, axis=1)[:, None])
    return total_area(s) ** 3 / algebraic_volume(s) ** 2


def effective_targets(mesh: TriangleImmersion, A0: float, V0: float, margin: float = 1e-4) -> tuple[float, float]:
    """Targets a polyhedron with this connectivity can actually reach.

    A polyhedron is never exactly round, so targets on or near the
    isoperimetric boundary are lowered in volume until ``A0^3 / V0^2`` sits
    ``margin`` above the discrete floor; otherwise they are returned as given.
    """
    check_targets(A0, V0)
    floor = isoperimetric_floor(mesh) * (1.0 + margin)
    if A0**3 / V0**2 >= floor:
        return A0, V0
    return A0, math.sqrt(A0**3 / floor)


# --------------------------------------------------------------------------
# monitor


def min_sheet_distance(mesh: TriangleImmersion, rings: int = 3, radius: float | None = None) -> float:
    """Smallest distance between two vertices more than ``rings`` edges apart
    (``inf`` if none lie within ``radius``)."""
    if radius is None:
        radius = 4.0 * mesh.mean_edge_length
    A = mesh.vertex_adjacency.astype(bool) + sparse.identity(mesh.n_vertices, dtype=bool, format="csr")
    R = A
    for _ in range(rings - 1):
        R = R @ A
    R = R.tocsr()
    pairs = cKDTree(mesh.vertices).query_pairs(radius, output_type="ndarray")
    if len(pairs) == 0:
        return math.inf
    close = np.asarray(R[pairs[:, 0], pairs[:, 1]]).ravel().astype(bool)
    pairs = pairs[~close]
    if len(pairs) == 0:
        return math.inf
    return float(np.linalg.norm(mesh.vertices[pairs[:, 0]] - mesh.vertices[pairs[:, 1]], axis=1).min())


@dataclass
class MonitorReading:
    worst_bound: float
    worst_x0: list
    min_sheet_distance: float
    max_multiplicity: int
    alarm: bool


def monitor(mesh: TriangleImmersion, c0: float, n_probes: int = 16, alarm_bound: float = 1.9) -> MonitorReading:
    """Li-Yau bound at the densest vertices plus a sheet-distance check.

    The alarm needs both a bound near 2 and a sign of a second sheet (close
    non-neighbouring vertices or a probe with two sheets), since a round
    sphere with ``c0 = 2 / r`` already sits at bound 2 while embedded.
    """
    worst, worst_x0, mult = -math.inf, None, 0
    for i in probe_points(mesh, n_probes):
        x0 = mesh.vertices[i]
        cert = liyau_bound(mesh, c0, x0, tol=1e-3)
        mult = max(mult, cert.measured_multiplicity)
        if cert.bound > worst:
            worst, worst_x0 = cert.bound, [float(v) for v in x0]
    dmin = min_sheet_distance(mesh)
    imminent = dmin < 2.0 * mesh.mean_edge_length or mult >= 2
    return MonitorReading(worst, worst_x0, dmin, mult, bool(worst >= alarm_bound and imminent))


# --------------------------------------------------------------------------
# descent


@dataclass
class RunConfig:
    c0: float
    A0: float
    V0: float
    max_iter: int = 500
    step0: float = 1e-2
    tol: float = 1e-6

    @classmethod
    def from_json(cls, path):
        d = json.loads(Path(path).read_text())
        unknown = set(d) - {f for f in cls.__dataclass_fields__} - {"start", "output_dir", "checkpoint_every"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})

    def to_dict(self):
        return asdict(self)


@dataclass
class FlowState:
    mesh: TriangleImmersion
    iteration: int
    energy_history: list
    residual_history: list
    step_size: float
    A0: float
    V0: float
    requested_targets: tuple
    worst_bound: float = math.nan
    min_sheet_distance: float = math.nan
    stop_reason: str = ""
    monitor_log: list = field(default_factory=list)

    @property
    def energy(self) -> float:
        return self.energy_history[-1]

    @property
    def residuals(self) -> tuple:
        return self.residual_history[-1]


def _tangent_projector(gA, gV):
    a = gA.ravel()
    a = a / np.linalg.norm(a)
    b = gV.ravel() - np.dot(gV.ravel(), a) * a
    nb = np.linalg.norm(b)
    basis = [a] if nb < 1e-14 else [a, b / nb]

    def proj(v):
        v = v.ravel().copy()
        for e in basis:
            v -= np.dot(v, e) * e
        return v.reshape(-1, 3)

    return proj


def tangential_smoothing(mesh: TriangleImmersion, weight: float = 0.5) -> TriangleImmersion:
    """Move every vertex toward its neighbour average, tangentially only."""
    A = mesh.vertex_adjacency.astype(float)
    deg = np.asarray(A.sum(axis=1)).ravel()
    avg = (A @ mesh.vertices) / deg[:, None]
    d = avg - mesh.vertices
    n = mesh.vertex_normals
    d -= np.einsum("ij,ij->i", d, n)[:, None] * n
    return with_vertices(mesh, mesh.vertices + weight * d)


def minimize_constrained(mesh0: TriangleImmersion, c0: float, A0: float, V0: float, *, max_iter: int = 500,
                         step0: float = 1e-2, tol: float = 1e-6, monitor_every: int = 10, smooth_every: int = 25,
                         raise_on_alarm: bool = False, log_path=None, checkpoint_dir=None,
                         checkpoint_every: int = 0) -> FlowState:
    """Minimise ``H_c0`` subject to ``area = A0``, ``volume = V0``.

    Steps follow the area-preconditioned energy gradient with its
    constraint-normal part removed; a backtracking line search (Armijo
    constant 1e-4, halving) accepts a step only if the energy after
    re-projection does not increase.  Stops when the projected gradient norm
    falls below ``tol``, after ``max_iter`` iterations, or on a monitor alarm.
    """
    requested = (float(A0), float(V0))
    A0, V0 = effective_targets(mesh0, A0, V0)
    if (A0, V0) != requested:
        log.info("volume target lowered from %.6g to %.6g (discrete isoperimetric floor)", requested[1], V0)
    mesh = project_constraints(mesh0, A0, V0)
    colors = distance2_coloring(mesh)
    E = helfrich_energy(mesh, c0)
    state = FlowState(mesh, 0, [E], [_residuals(mesh, A0, V0)], step0, A0, V0, requested)
    rows = []

    def record(reading=None):
        rA, rV = state.residuals
        rows.append((state.iteration, state.energy, rA, rV,
                     state.worst_bound if reading else math.nan,
                     state.min_sheet_distance if reading else math.nan))

    record()
    alpha = step0
    for it in range(1, max_iter + 1):
        state.iteration = it
        g = discrete_gradient(mesh, c0, colors=colors)
        proj = _tangent_projector(area_gradient(mesh), volume_gradient(mesh))
        gT = proj(g)
        gnorm = float(np.linalg.norm(gT))
        if gnorm < tol:
            state.stop_reason = "converged"
            break
        p = -proj(g / mesh.vertex_areas[:, None])
        slope = float(np.vdot(g, p))
        if not slope < 0:
            p, slope = -gT, -gnorm**2
        # cap the first trial so no vertex moves more than half an edge
        cap = 0.5 * mesh.mean_edge_length / max(np.abs(p).max(), 1e-300)
        alpha = min(2.0 * alpha, cap)
        accepted = False
        while alpha > 1e-14 * cap:
            try:
                trial = project_constraints(with_vertices(mesh, mesh.vertices + alpha * p), A0, V0)
                Et = helfrich_energy(trial, c0)
            except NumericalError:
                Et = math.inf
            if Et <= E + 1e-4 * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            state.stop_reason = "line_search_stalled"
            break
        mesh, E = trial, Et
        if smooth_every and it % smooth_every == 0:
            try:
                smoothed = project_constraints(tangential_smoothing(mesh), A0, V0)
                Es = helfrich_energy(smoothed, c0)
                if Es <= E:
                    mesh, E = smoothed, Es
            except NumericalError:
                pass
        state.mesh = mesh
        state.step_size = alpha
        state.energy_history.append(E)
        state.residual_history.append(_residuals(mesh, A0, V0))
        reading = None
        if monitor_every and it % monitor_every == 0:
            reading = monitor(mesh, c0)
            state.worst_bound = reading.worst_bound
            state.min_sheet_distance = reading.min_sheet_distance
            state.monitor_log.append(asdict(reading))
        record(reading)
        if checkpoint_dir is not None and checkpoint_every and it % checkpoint_every == 0:
            write_obj(mesh, Path(checkpoint_dir) / f"iter_{it:05d}.obj")
        if reading is not None and reading.alarm:
            state.stop_reason = "monitor_alarm"
            break
    else:
        state.stop_reason = "max_iter"
    if log_path is not None:
        write_csv(log_path, ["iter", "energy", "residual_area", "residual_volume", "worst_bound", "min_sheet_dist"], rows)
    if checkpoint_dir is not None:
        write_obj(state.mesh, Path(checkpoint_dir) / "final.obj")
    if state.stop_reason == "monitor_alarm" and raise_on_alarm:
        raise MonitorAlarm(f"embeddedness monitor fired at iteration {state.iteration}", state)
    return state


def hausdorff_to_sphere(mesh: TriangleImmersion, r: float = 1.0, center=None) -> float:
    """Largest vertex deviation from the sphere of radius ``r`` (about the
    vertex centroid by default), relative to ``r``."""
    c = mesh.vertices.mean(axis=0) if center is None else np.asarray(center)
    return float(np.abs(np.linalg.norm(mesh.vertices - c, axis=1) - r).max() / r)


# --------------------------------------------------------------------------
# sweeps


def penalized_sweep(c0: float, lam: float, p: float, radii, subdivisions: int = 4):
    """``[(r, H_c0 + lam A + p V)]`` for round spheres of the given radii."""
    from .shapes import sphere

    base = sphere(1.0, subdivisions)
    out = []
    for r in radii:
        m = with_vertices(base, base.vertices * r)
        out.append((float(r), penalized_energy(m, c0, lam, p)))
    return out


def format_row(row) -> list:
    return [fmt(v) for v in row]

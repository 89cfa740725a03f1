"""Oriented 2-varifolds as finite lists of weighted, oriented atoms.

An atom is a point ``x``, a unit normal ``n`` and a weight ``w`` (area).
Mesh-sourced atoms also carry the interpolated mean curvature vector so the
energy and monotonicity integrals become plain weighted sums.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import MismatchedFieldLength, RhoBelowResolution
from .mesh import TriangleImmersion, mean_curvature


@dataclass(frozen=True, eq=False)
class OrientedVarifoldAtoms:
    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    H: np.ndarray | None = None
    source: str = ""
    resolution: float = 0.0

    def __post_init__(self):
        n = len(self.weights)
        if self.points.shape != (n, 3) or self.normals.shape != (n, 3):
            raise MismatchedFieldLength("points, normals and weights must have matching lengths")
        if self.H is not None and self.H.shape != (n, 3):
            raise MismatchedFieldLength("H must have one vector per atom")
        if n and (self.weights <= 0).any():
            raise ValueError("atom weights must be positive")

    def __len__(self):
        return len(self.weights)

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.weights))

    @property
    def H_sc(self) -> np.ndarray:
        if self.H is None:
            raise ValueError("atoms carry no mean curvature")
        return np.einsum("ij,ij->i", self.H, self.normals)

    @classmethod
    def empty(cls):
        z = np.zeros((0, 3))
        return cls(z, z.copy(), np.zeros(0), H=z.copy())


@dataclass(frozen=True, eq=False)
class BoundaryAtoms:
    """Discrete singular part of the first variation: points, unit
    directions ``eta`` and line weights."""

    points: np.ndarray
    directions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        n = len(self.weights)
        if self.points.shape != (n, 3) or self.directions.shape != (n, 3):
            raise MismatchedFieldLength("boundary points, directions and weights must match")
        if n:
            if (self.weights <= 0).any():
                raise ValueError("boundary weights must be positive")
            if np.abs(np.linalg.norm(self.directions, axis=1) - 1.0).max() > 1e-9:
                raise ValueError("boundary directions must be unit vectors")

    def __len__(self):
        return len(self.weights)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    @classmethod
    def empty(cls):
        z = np.zeros((0, 3))
        return cls(z, z.copy(), np.zeros(0))


# barycentric coordinates of the atoms on one face
_RULES = {
    1: (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])),
    3: (np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]), np.full(3, 1 / 3)),
}


def quadrature_varifold(mesh: TriangleImmersion, order: int = 1, with_curvature: bool = True) -> OrientedVarifoldAtoms:
    """Push a mesh forward to atoms: face centroids (order 1) or edge
    midpoints (order 3, three atoms per face of weight area/3)."""
    if order not in _RULES:
        raise ValueError("order must be 1 or 3")
    bary, wts = _RULES[order]
    p = mesh.corners
    pts = np.einsum("qk,mkd->mqd", bary, p).reshape(-1, 3)
    normals = np.repeat(mesh.face_normals, len(wts), axis=0)
    weights = (mesh.face_areas[:, None] * wts[None, :]).ravel()
    H = None
    if with_curvature:
        Hv = mean_curvature(mesh).H[mesh.faces]
        H = np.einsum("qk,mkd->mqd", bary, Hv).reshape(-1, 3)
    # edge-midpoint atoms sit about half an edge apart
    spacing = mesh.mean_edge_length / (2.0 if order == 3 else 1.0)
    return OrientedVarifoldAtoms(pts, normals, weights, H=H, source=f"mesh:order{order}", resolution=spacing)


def _sorted_distances(V: OrientedVarifoldAtoms, x0):
    d = np.linalg.norm(V.points - np.asarray(x0, dtype=np.float64), axis=1)
    order = np.argsort(d, kind="stable")
    return d[order], np.cumsum(V.weights[order])


def weight_in_ball(V: OrientedVarifoldAtoms, x0, rho):
    """Total weight of atoms with ``|x - x0| <= rho``.  ``rho`` may be an
    array; the distance sort is shared across all radii."""
    rho_arr = np.atleast_1d(np.asarray(rho, dtype=np.float64))
    if (rho_arr <= 0).any():
        raise ValueError("rho must be positive")
    if len(V) == 0:
        out = np.zeros_like(rho_arr)
    else:
        d, cum = _sorted_distances(V, x0)
        k = np.searchsorted(d, rho_arr, side="right")
        out = np.where(k > 0, cum[np.maximum(k - 1, 0)], 0.0)
    return float(out[0]) if np.ndim(rho) == 0 else out


def density_profile(V: OrientedVarifoldAtoms, x0, rhos):
    """``[(rho, mu(B_rho) / (pi rho^2)), ...]`` for each radius."""
    rhos = np.asarray(rhos, dtype=np.float64)
    floor = 3.0 * V.resolution
    if (rhos < floor).any():
        raise RhoBelowResolution(f"rho={rhos.min():.4g} is below three atom spacings ({floor:.4g})")
    mu = weight_in_ball(V, x0, rhos)
    return list(zip(rhos.tolist(), (mu / (np.pi * rhos**2)).tolist()))


def reverse_orientation(V: OrientedVarifoldAtoms) -> OrientedVarifoldAtoms:
    return replace(V, normals=-V.normals, source=V.source + ":reversed")


def rigid_motion(V: OrientedVarifoldAtoms, rotation=None, translation=(0.0, 0.0, 0.0)) -> OrientedVarifoldAtoms:
    R = np.eye(3) if rotation is None else np.asarray(rotation, dtype=np.float64)
    t = np.asarray(translation, dtype=np.float64)
    H = None if V.H is None else V.H @ R.T
    return replace(V, points=V.points @ R.T + t, normals=V.normals @ R.T, H=H)


# --------------------------------------------------------------------------
# first variation


@dataclass(frozen=True)
class ConstantField:
    value: tuple = (1.0, 0.0, 0.0)

    def __call__(self, x):
        return np.broadcast_to(np.asarray(self.value, dtype=float), x.shape).copy()

    def jacobian(self, x):
        return np.zeros((len(x), 3, 3))


@dataclass(frozen=True)
class LinearField:
    """``X(x) = A (x - center)``."""

    matrix: np.ndarray = field(default_factory=lambda: np.eye(3))
    center: tuple = (0.0, 0.0, 0.0)

    def __call__(self, x):
        return (x - np.asarray(self.center)) @ np.asarray(self.matrix).T

    def jacobian(self, x):
        return np.broadcast_to(np.asarray(self.matrix, dtype=float), (len(x), 3, 3)).copy()


@dataclass(frozen=True)
class GaussianField:
    """``X(x) = v exp(-|x - c|^2 / s^2)``; effectively compactly supported."""

    direction: tuple = (0.0, 0.0, 1.0)
    center: tuple = (0.0, 0.0, 0.0)
    scale: float = 0.5

    def __call__(self, x):
        g = np.exp(-np.sum((x - np.asarray(self.center)) ** 2, axis=1) / self.scale**2)
        return g[:, None] * np.asarray(self.direction, dtype=float)

    def jacobian(self, x):
        d = x - np.asarray(self.center)
        g = np.exp(-np.sum(d**2, axis=1) / self.scale**2)
        grad = (-2.0 / self.scale**2) * g[:, None] * d
        return np.einsum("i,nj->nij", np.asarray(self.direction, dtype=float), grad)


def tangential_divergence(normals, jac):
    """``tr((I - n n^T) DX)`` per atom."""
    tr = np.trace(jac, axis1=1, axis2=2)
    return tr - np.einsum("ni,nij,nj->n", normals, jac, normals)


def first_variation_residual(V: OrientedVarifoldAtoms, H_field, test_fields) -> float:
    """Largest normalised defect of ``delta V(X) = -int <X, H> d mu``.

    For each field the residual is
    ``|sum w div_T X + sum w <X, H>| / (sum w |div_T X| + sum w |X||H|)``,
    so a correct ``H`` gives values near zero and ``H = 0`` gives 1 whenever
    the field has nonzero divergence.
    """
    H_field = np.asarray(H_field, dtype=np.float64)
    if H_field.shape != V.points.shape:
        raise MismatchedFieldLength(f"H field has shape {H_field.shape}, atoms need {V.points.shape}")
    w = V.weights
    worst = 0.0
    for X in test_fields:
        val = X(V.points)
        div = tangential_divergence(V.normals, X.jacobian(V.points))
        num = abs(np.sum(w * div) + np.sum(w * np.einsum("ij,ij->i", val, H_field)))
        den = np.sum(w * np.abs(div)) + np.sum(w * np.linalg.norm(val, axis=1) * np.linalg.norm(H_field, axis=1))
        worst = max(worst, float(num / (den + 1e-300)))
    return worst

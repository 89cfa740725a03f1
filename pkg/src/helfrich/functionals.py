"""Scalar curvature functionals on meshes and atom varifolds.

Mesh energies use vertex quadrature (scalar mean curvature at vertices,
barycentric vertex areas); atom energies use the per-atom curvature.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .mesh import CurvatureField, TriangleImmersion, algebraic_volume, total_area
from .varifold import OrientedVarifoldAtoms


def _samples(obj):
    if isinstance(obj, TriangleImmersion):
        c = obj.curvature
        return c.H_sc, c.area
    if isinstance(obj, OrientedVarifoldAtoms):
        return obj.H_sc, obj.weights
    if isinstance(obj, CurvatureField):
        return obj.H_sc, obj.area
    raise TypeError(f"cannot evaluate curvature functionals on {type(obj).__name__}")


def helfrich_energy(obj, c0: float) -> float:
    """``(1/4) * integral (H_sc - c0)^2``."""
    H, w = _samples(obj)
    return float(0.25 * np.sum(w * (H - c0) ** 2))


def willmore_energy(obj) -> float:
    return helfrich_energy(obj, 0.0)


def average_mean_curvature(obj) -> float:
    H, w = _samples(obj)
    return float(np.sum(w * H) / np.sum(w))


def cmc_deficit(obj) -> tuple[float, float]:
    """``(deficit, H_bar)``: the Helfrich energy at ``c0 = H_bar``, which is
    its minimum over all ``c0``."""
    H, w = _samples(obj)
    hbar = float(np.sum(w * H) / np.sum(w))
    return float(0.25 * np.sum(w * (H - hbar) ** 2)), hbar


def total_mean_curvature(obj) -> float:
    """``(1/2) * integral H_sc``."""
    H, w = _samples(obj)
    return float(0.5 * np.sum(w * H))


def penalized_energy(mesh: TriangleImmersion, c0: float, lam: float, p: float) -> float:
    """Helfrich energy plus tensile stress ``lam * A`` and osmotic pressure ``p * V``."""
    return helfrich_energy(mesh, c0) + lam * total_area(mesh) + p * algebraic_volume(mesh)


@dataclass
class EnergyReport:
    area: float
    algebraic_volume: float
    helfrich: float
    willmore: float
    cmc_deficit: float
    average_H_sc: float
    total_mean_curvature: float
    isoperimetric_ratio: float
    c0: float
    discretization_error: dict | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["discretization_error"] is None:
            del d["discretization_error"]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), default=_fmt)


def _fmt(x):
    return float(x)


def energy_report(mesh: TriangleImmersion, c0: float = 0.0, coarser: TriangleImmersion | None = None) -> EnergyReport:
    """All functionals at once.  With ``coarser`` (the same shape one
    refinement level down) each entry gets an error estimate
    ``|value - value_coarser|``."""
    A = total_area(mesh)
    V = algebraic_volume(mesh)
    deficit, hbar = cmc_deficit(mesh)
    rep = EnergyReport(
        area=A,
        algebraic_volume=V,
        helfrich=helfrich_energy(mesh, c0),
        willmore=willmore_energy(mesh),
        cmc_deficit=deficit,
        average_H_sc=hbar,
        total_mean_curvature=total_mean_curvature(mesh),
        isoperimetric_ratio=A**3 / V**2 if V != 0 else math.inf,
        c0=float(c0),
    )
    if coarser is not None:
        other = energy_report(coarser, c0)
        rep.discretization_error = {
            k: abs(v - getattr(other, k))
            for k, v in rep.to_dict().items()
            if k not in ("c0",) and isinstance(v, float) and math.isfinite(v)
        }
    return rep

"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from helfrich import shapes
from helfrich.concvol import concentrated_volume
from helfrich.functionals import helfrich_energy, willmore_energy
from helfrich.liyau import (
    boundary_term,
    diameter_bounds,
    gamma_threshold,
    liyau_bound,
    local_edge_length,
    minkowski_check,
    monotonicity_profile,
    probe_points,
)
from helfrich.mesh import algebraic_volume, diameter, mean_curvature, total_area, with_vertices
from helfrich.optimize import brute_force_gradient, discrete_gradient, hausdorff_to_sphere, minimize_constrained

PI = math.pi


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail

    return emit


@pytest.fixture(scope="module")
def all_shapes():
    return {
        "sphere": shapes.sphere(1.0, 4),
        "capped_cylinder": shapes.capped_cylinder(2.0, 1.0, 0.05),
        "torus": shapes.torus(0.5, 0.05),
        "dumbbell": shapes.dumbbell(0.05, 0.5, 0.8, 0.05),
        "dumbbell_touching": shapes.dumbbell(0.02, 0.0, 1.0, 0.05),
        "touching_spheres": shapes.touching_spheres(1.0, 4),
        "sphere_torus_mixed": shapes.sphere_torus_mixed(0.5, 0.05),
        "lens": shapes.lens(0.05)[0],
    }


EMBEDDED = ("sphere", "capped_cylinder", "torus", "dumbbell", "lens")


def rel(a, b):
    return abs(a - b) / abs(b)


def test_criterion_01_sphere_closed_forms(verdict):
    t = time.perf_counter()
    m = shapes.sphere(1.0, 4)
    checks = {}
    checks["area"] = (total_area(m), 4 * PI, 2e-3)
    checks["volume"] = (algebraic_volume(m), 4 * PI / 3, 5e-3)
    checks["mean H_sc"] = (float(mean_curvature(m).H_sc.mean()), 2.0, 1e-2)
    checks["willmore"] = (willmore_energy(m), 4 * PI, 1e-2)
    checks["Vc(center)"] = (concentrated_volume(m, [0, 0, 0]).value, 4 * PI, 1e-2)
    checks["Vc(surface)"] = (concentrated_volume(m, [1, 0, 0]).value, 2 * PI, 2e-2)
    elapsed = time.perf_counter() - t
    bad = [k for k, (v, ref, tol) in checks.items() if rel(v, ref) > tol]
    detail = ", ".join(f"{k} err {rel(v, ref):.2e}" for k, (v, ref, _) in checks.items())
    verdict(1, not bad and elapsed < 10, f"{detail}; {elapsed:.1f}s")


def test_criterion_02_liyau_sharpness(verdict):
    base = shapes.sphere(1.0, 4)
    rs = [0.4, 0.2, 0.1, 0.05]
    bounds, errs = [], []
    for r in rs:
        b = liyau_bound(with_vertices(base, base.vertices * r), -1.0, [r, 0, 0]).bound
        exact = 0.25 * (-r - 2) ** 2 - r
        bounds.append(b)
        errs.append(rel(b, exact))
    ok = max(errs) <= 0.02 and all(x > y for x, y in zip(bounds, bounds[1:]))
    verdict(2, ok, "bounds " + ", ".join(f"{b:.4f}" for b in bounds) + f"; max rel err {max(errs):.1e}")


def test_criterion_03_touching_equality(verdict, all_shapes):
    m = all_shapes["dumbbell_touching"]
    W = willmore_energy(m)
    cert = liyau_bound(m, 0.0, [0, 0, 0])
    ok = 8 * PI * 0.98 <= W <= 8 * PI * 1.2 and 1.9 <= cert.bound <= 2.3 and cert.measured_multiplicity == 2
    verdict(3, ok, f"W/8pi {W / (8 * PI):.4f}, neck bound {cert.bound:.4f}, multiplicity {cert.measured_multiplicity}")


def test_criterion_04_mixed_orientation(verdict):
    r_star = shapes.sphere_torus_root(1e-9)
    residual = 2 * PI**2 * r_star**2 * (1 + r_star) - 4 * PI / 3
    # independent root: cubic 2 pi^2 (r^3 + r^2) - 4 pi / 3 = 0
    roots = np.roots([2 * PI**2, 2 * PI**2, 0, -4 * PI / 3])
    ref = float(max(r.real for r in roots if abs(r.imag) < 1e-12))
    m = shapes.sphere_torus_mixed(1.05 * r_star, 0.05)
    V = algebraic_volume(m)
    vc = concentrated_volume(m, [0, 0, 0]).value
    ok = abs(r_star - ref) <= 1e-6 and V > 0 and vc < 0
    verdict(4, ok, f"r* {r_star:.7f} (cubic root {ref:.7f}, residual {residual:.1e}), V {V:.4f}, Vc(0) {vc:.3f}")


def _probes(m):
    rng = np.random.default_rng(5)
    idx = [int(probe_points(m, 1)[0]), int(np.argmax(m.vertices[:, 2])), int(rng.integers(m.n_vertices))]
    return [m.vertices[i] for i in idx]


def test_criterion_05_monotonicity(verdict, all_shapes):
    worst, failures = 0.0, []
    for name in ("sphere", "capped_cylinder", "torus", "dumbbell"):
        m = all_shapes[name]
        D = diameter(m)
        for c0 in (-1.0, 0.0):
            for x0 in _probes(m):
                rhos = np.geomspace(3 * local_edge_length(m, x0), 2 * D, 9)
                prof = monotonicity_profile(m, c0, x0, rhos)
                g = prof.gamma
                drop = float(np.min(np.diff(g))) / float(np.max(np.abs(g)))
                worst = min(worst, drop)
                if not prof.is_nondecreasing(1e-3):
                    failures.append((name, c0, list(x0)))
    sph = monotonicity_profile(all_shapes["sphere"], 0.0, [1, 0, 0], np.linspace(0.3, 1.9, 9))
    const = float(np.max(np.abs(sph.gamma / PI - 1)))
    ok = not failures and const <= 0.03
    verdict(5, ok, f"24 profiles, worst relative drop {worst:.1e}, sphere gamma/pi within {const:.1e}; failures {failures}")


def test_criterion_06_diameter_sandwich(verdict, all_shapes):
    bad = []
    for name, m in all_shapes.items():
        for c0 in (-1.0, -0.5, 0.0):
            d = diameter_bounds(m, c0)
            if not d.lower_ok or d.upper_ok is False:
                bad.append((name, c0))
    s = diameter_bounds(all_shapes["sphere"], 0.0)
    ok = not bad and rel(s.lower, 1.0) <= 0.02 and rel(s.upper, 18.0) <= 0.02
    verdict(6, ok, f"{len(all_shapes)} shapes x 3 c0; sphere lower {s.lower:.4f}, upper {s.upper:.3f}; violations {bad}")


def test_criterion_07_4pi_lower_bound(verdict, all_shapes):
    ratios = {}
    for name in EMBEDDED:
        for c0 in (-0.25, -1.0, -2.0):
            ratios[(name, c0)] = helfrich_energy(all_shapes[name], c0) / (4 * PI)
    low = min(ratios, key=ratios.get)
    verdict(7, ratios[low] > 0.98, f"min H/4pi {ratios[low]:.4f} at {low[0]}, c0={low[1]}")


def test_criterion_08_minkowski(verdict, all_shapes):
    s = minkowski_check(all_shapes["sphere"], [1, 0, 0])
    db = all_shapes["dumbbell"]
    d = minkowski_check(db, db.vertices[np.argmin(db.vertices[:, 2])])
    c = minkowski_check(all_shapes["capped_cylinder"], [1, 0, 0])
    ok = (s.applicable and rel(s.lhs, s.rhs) <= 0.01 and d.applicable and d.passes and c.applicable and c.passes)
    verdict(8, ok, f"sphere lhs/rhs {s.lhs / s.rhs:.4f}; dumbbell {d.lhs:.3f} >= {d.rhs:.3f}; capsule {c.lhs:.3f} >= {c.rhs:.3f}")


def test_criterion_09_threshold_arithmetic(verdict):
    g = gamma_threshold(-1.0, 4 * PI, 4 * PI / 3).gamma
    direct = 4 * PI * (math.sqrt(1 + 1 / 594) - 1)
    z = gamma_threshold(0.0, 4 * PI, 4 * PI / 3).gamma
    ok = rel(g, direct) <= 1e-12 and z == 0.0
    verdict(9, ok, f"Gamma(-1) {g!r} vs {direct!r}, Gamma(0) {z}")


def test_criterion_10_optimizer(verdict):
    m0 = shapes.sphere(1.05, 3)
    t = time.perf_counter()
    st = minimize_constrained(m0, 2.0, 4 * PI, 4 * PI / 3)
    elapsed = time.perf_counter() - t
    haus = hausdorff_to_sphere(st.mesh, 1.0)
    mono = bool(np.all(np.diff(st.energy_history) <= 1e-12))
    resid = max(max(r) for r in st.residual_history)
    ok = m0.n_vertices <= 2562 and elapsed < 300 and st.energy < 0.05 and haus < 0.02 and mono and resid <= 1e-6
    verdict(10, ok, f"energy {st.energy:.2e}, Hausdorff {haus:.2e}, monotone {mono}, max residual {resid:.1e}, "
                    f"{st.iteration} iterations ({st.stop_reason}), {elapsed:.1f}s")


def test_criterion_11_lens(verdict):
    _, beta = shapes.lens(0.05)
    mass = float(beta.weights.sum())
    bt = boundary_term(beta, [0, 0, 0.5])
    ok = rel(mass, 3 * PI) <= 5e-3 and rel(bt, 3 * math.sqrt(3) / 4) <= 1e-2
    verdict(11, ok, f"mass/3pi {mass / (3 * PI):.5f}, boundary term/(3 sqrt3/4) {bt / (3 * math.sqrt(3) / 4):.5f}")


def test_criterion_12_gradient(verdict):
    m = shapes.sphere(1.0, 3)
    rng = np.random.default_rng(12)
    m = with_vertices(m, m.vertices * (1 + 0.02 * rng.standard_normal((m.n_vertices, 1))))
    h = 1e-5 * m.mean_edge_length
    g = discrete_gradient(m, -1.0, h=h)
    ref = brute_force_gradient(m, -1.0, h=h / 4)
    err = float(np.abs(g - ref).max() / np.abs(ref).max())
    verdict(12, m.n_vertices == 642 and err <= 1e-3, f"{m.n_vertices} vertices, max relative error {err:.1e}")

import csv
import io
import json
import math
import os
import subprocess
import sys

import pytest

from helfrich.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, EXIT_VIOLATED, dumps, main
from helfrich.meshio import read_boundary_csv, read_mesh

PI = math.pi


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def sphere_obj(tmp_path_factory):
    p = tmp_path_factory.mktemp("cli") / "s.obj"
    assert main(["shape", "sphere", "--r", "1", "--subdiv", "4", "--out", str(p)]) == 0
    return p


@pytest.fixture(scope="module")
def coarse_obj(tmp_path_factory):
    p = tmp_path_factory.mktemp("cli") / "c.obj"
    assert main(["shape", "sphere", "--r", "1", "--subdiv", "3", "--out", str(p)]) == 0
    return p


class TestShape:
    def test_sphere(self, capsys, tmp_path):
        code, out, _ = run(capsys, "shape", "sphere", "--r", 1, "--subdiv", 4, "--out", tmp_path / "s.obj")
        assert code == EXIT_OK
        assert out.strip() == "faces 5120 vertices 2562"
        assert read_mesh(tmp_path / "s.obj").n_faces == 5120

    def test_dumbbell(self, capsys, tmp_path):
        code, _, _ = run(capsys, "shape", "dumbbell", "--a", 0.05, "--l", 0, "--r", 1, "--out", tmp_path / "d.obj")
        assert code == EXIT_OK
        assert read_mesh(tmp_path / "d.obj").n_components == 1

    def test_lens(self, capsys, tmp_path):
        code, _, _ = run(capsys, "shape", "lens", "--out", tmp_path / "l.obj", "--boundary", tmp_path / "b.csv")
        assert code == EXIT_OK
        assert read_boundary_csv(tmp_path / "b.csv").weights.sum() == pytest.approx(3 * PI, rel=5e-3)

    def test_unknown_shape(self, capsys, tmp_path):
        code, _, err = run(capsys, "shape", "klein_bottle", "--out", tmp_path / "k.obj")
        assert code == EXIT_USAGE and "unknown shape" in err

    def test_bad_param(self, capsys, tmp_path):
        code, _, err = run(capsys, "shape", "sphere", "--a", 0.1, "--out", tmp_path / "k.obj")
        assert code == EXIT_USAGE and "--a" in err

    def test_neck_too_large(self, capsys, tmp_path):
        code, _, _ = run(capsys, "shape", "dumbbell", "--a", 0.5, "--l", 0, "--r", 1, "--out", tmp_path / "k.obj")
        assert code == EXIT_USAGE


class TestReport:
    def test_c0_two(self, capsys, sphere_obj):
        code, out, _ = run(capsys, "report", sphere_obj, "--c0", 2)
        assert code == EXIT_OK
        assert json.loads(out)["helfrich"] < 0.05

    def test_willmore(self, capsys, sphere_obj):
        _, out, _ = run(capsys, "report", sphere_obj)
        assert json.loads(out)["willmore"] == pytest.approx(4 * PI, rel=0.01)

    def test_coarser(self, capsys, sphere_obj, coarse_obj):
        _, out, _ = run(capsys, "report", sphere_obj, "--coarser", coarse_obj)
        assert "discretization_error" in json.loads(out)

    def test_missing_file(self, capsys, tmp_path):
        code, out, err = run(capsys, "report", tmp_path / "nope.obj")
        assert code == EXIT_USAGE and out == "" and "not found" in err


class TestLiYau:
    def test_sphere(self, capsys, sphere_obj):
        code, out, _ = run(capsys, "liyau", sphere_obj, "--c0", -1, "--x0", 1, 0, 0)
        d = json.loads(out)
        assert code == EXIT_OK
        assert d["bound"] == pytest.approx(1.25, rel=0.01) and d["verdict"] == "consistent"

    def test_touching(self, capsys, tmp_path):
        p = tmp_path / "t.obj"
        run(capsys, "shape", "touching_spheres", "--subdiv", 4, "--out", p)
        code, out, _ = run(capsys, "liyau", p, "--x0", 0, 0, 0)
        d = json.loads(out)
        assert code == EXIT_OK and d["measured"] == 2
        assert d["bound"] == pytest.approx(2.0, rel=0.01)

    def test_probe_auto(self, capsys, coarse_obj):
        code, out, _ = run(capsys, "liyau", coarse_obj, "--c0", -1, "--probe-auto")
        d = json.loads(out)
        assert code == EXIT_OK and d["n_probes"] == 64 and d["verdict"] == "consistent"

    def test_violated_exit_code(self, capsys, tmp_path):
        # the bare icosahedron under-resolves the curvature energy enough to break the bound
        p = tmp_path / "ico.obj"
        run(capsys, "shape", "sphere", "--subdiv", 0, "--out", p)
        code, out, _ = run(capsys, "liyau", p, "--c0", -0.5, "--probe-auto")
        assert code == EXIT_VIOLATED and json.loads(out)["verdict"] == "violated"

    def test_needs_point(self, capsys, coarse_obj):
        code, _, _ = run(capsys, "liyau", coarse_obj)
        assert code == EXIT_USAGE

    def test_tol_out_of_range(self, capsys, coarse_obj):
        code, _, _ = run(capsys, "liyau", coarse_obj, "--x0", 1, 0, 0, "--tol", 0.5)
        assert code == EXIT_USAGE


class TestMonotonicity:
    def test_sphere_profile(self, capsys, sphere_obj, tmp_path):
        out_csv = tmp_path / "p.csv"
        code, _, _ = run(capsys, "monotonicity", sphere_obj, "--x0", 1, 0, 0, "--rho-min", 0.3, "--rho-max", 1.9,
                         "--n", 9, "--out", out_csv)
        assert code == EXIT_OK
        rows = list(csv.DictReader(io.StringIO(out_csv.read_text())))
        assert list(rows[0]) == ["rho", "gamma", "term1", "term2", "term3", "term4", "term5"]
        assert len(rows) == 9
        for r in rows:
            assert float(r["gamma"]) == pytest.approx(PI, rel=0.03)

    def test_torus_profile(self, capsys, tmp_path):
        p = tmp_path / "t.obj"
        run(capsys, "shape", "torus", "--r", 0.5, "--resolution", 0.05, "--out", p)
        code, out, _ = run(capsys, "monotonicity", p, "--c0", -1, "--x0", 1.5, 0, 0, "--rho-min", 0.2,
                           "--rho-max", 8, "--n", 9)
        assert code == EXIT_OK
        g = [float(r["gamma"]) for r in csv.DictReader(io.StringIO(out))]
        assert all(b >= a - 1e-3 * max(map(abs, g)) for a, b in zip(g, g[1:]))

    def test_below_resolution(self, capsys, sphere_obj):
        code, _, err = run(capsys, "monotonicity", sphere_obj, "--x0", 1, 0, 0, "--rho-min", 0.001, "--rho-max", 1)
        assert code == EXIT_USAGE and "below" in err


class TestMinimize:
    def test_sphere_config(self, capsys, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"c0": 2, "A0": 4 * PI, "V0": 4 * PI / 3, "max_iter": 20,
                                   "start": {"shape": "sphere", "r": 1.05, "subdivisions": 3}}))
        code, out, _ = run(capsys, "minimize", cfg, "--out-dir", tmp_path / "out")
        d = json.loads(out)
        assert code == EXIT_OK
        assert d["energy"] < 0.05 and d["sphere_deviation"] < 0.02
        assert (tmp_path / "out" / "final.obj").is_file()
        log = list(csv.DictReader(io.StringIO((tmp_path / "out" / "log.csv").read_text())))
        e = [float(r["energy"]) for r in log]
        assert all(b <= a + 1e-12 for a, b in zip(e, e[1:]))

    def test_mesh_path_start(self, capsys, tmp_path, coarse_obj):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"c0": 0, "A0": 4 * PI, "V0": 4.0, "max_iter": 2, "start": str(coarse_obj)}))
        code, out, _ = run(capsys, "minimize", cfg, "--out-dir", tmp_path / "o")
        assert code == EXIT_OK and json.loads(out)["iterations"] <= 2

    def test_missing_start(self, capsys, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"c0": 0, "A0": 1, "V0": 0.1}))
        assert run(capsys, "minimize", cfg, "--out-dir", tmp_path / "o")[0] == EXIT_USAGE

    def test_infeasible_targets(self, capsys, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"c0": 0, "A0": 1, "V0": 10, "start": {"shape": "sphere", "subdivisions": 2}}))
        assert run(capsys, "minimize", cfg, "--out-dir", tmp_path / "o")[0] == EXIT_USAGE


class TestSweep:
    def test_penalized(self, capsys, tmp_path):
        spec = tmp_path / "s.json"
        spec.write_text(json.dumps({"kind": "penalized", "c0": -1, "lam": 0.1, "p": 0.1,
                                    "radii": [1, 0.5, 0.25, 0.125, 0.0625], "subdivisions": 3}))
        code, out, _ = run(capsys, "sweep", spec)
        vals = [float(r["penalized_energy"]) for r in csv.DictReader(io.StringIO(out))]
        assert code == EXIT_OK
        assert all(b < a for a, b in zip(vals, vals[1:])) and vals[-1] > 4 * PI * 0.99

    def test_neck(self, capsys, tmp_path):
        spec = tmp_path / "s.json"
        spec.write_text(json.dumps({"kind": "neck", "c0": 2, "a": [0.05, 0.035, 0.02], "resolution": 0.05}))
        code, out, _ = run(capsys, "sweep", spec)
        vals = [float(r["helfrich"]) for r in csv.DictReader(io.StringIO(out))]
        assert code == EXIT_OK and vals[0] > vals[1] > vals[2]

    def test_empty(self, capsys, tmp_path):
        spec = tmp_path / "s.json"
        spec.write_text("")
        assert run(capsys, "sweep", spec)[0] == EXIT_USAGE
        spec.write_text("{}")
        assert run(capsys, "sweep", spec)[0] == EXIT_USAGE


class TestFormatting:
    def test_dumps_17_digits(self):
        assert dumps({"x": 0.1, "n": 3, "s": "a", "v": [1 / 3, -0.0]}) == \
            '{"x": 0.10000000000000001, "n": 3, "s": "a", "v": [0.33333333333333331, 0]}'

    def test_threads(self, capsys, coarse_obj, monkeypatch):
        monkeypatch.setenv("OMP_NUM_THREADS", "8")
        assert run(capsys, "--threads", 1, "report", coarse_obj)[0] == EXIT_OK
        assert os.environ["OMP_NUM_THREADS"] == "1"
        assert run(capsys, "--threads", 0, "report", coarse_obj)[0] == EXIT_USAGE

    def test_numeric_exit_code(self, capsys, tmp_path):
        # a sliver tetrahedron has cotangents beyond the degeneracy guard
        p = tmp_path / "sliver.obj"
        p.write_text("v 0 0 0\nv 1 0 0\nv 0.5 1e-9 0\nv 0.5 0.3 1\nf 1 3 2\nf 1 2 4\nf 2 3 4\nf 1 4 3\n")
        code, _, _ = run(capsys, "report", p)
        assert code == EXIT_NUMERIC


class TestDeterminism:
    def test_byte_identical(self, tmp_path):
        cmd = [sys.executable, "-m", "helfrich.cli"]
        outs = []
        for k in range(2):
            mesh = tmp_path / f"m{k}.obj"
            subprocess.run(cmd + ["shape", "capped_cylinder", "--l", "1", "--r", "0.8", "--resolution", "0.1",
                                  "--out", str(mesh)], check=True, capture_output=True)
            rep = subprocess.run(cmd + ["report", str(mesh), "--c0", "-1"], check=True, capture_output=True)
            ly = subprocess.run(cmd + ["liyau", str(mesh), "--c0", "-1", "--probe-auto", "--probes", "8"],
                                check=True, capture_output=True)
            outs.append((mesh.read_bytes(), rep.stdout, ly.stdout))
        assert outs[0] == outs[1]

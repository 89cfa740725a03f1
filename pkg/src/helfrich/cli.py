"""Command-line front end: ``helfrich <command> ...``.

Exit codes: 0 success, 1 violated certificate, 2 usage or input error,
3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import inspect
import json
import math
import os
import sys
from pathlib import Path

EXIT_OK, EXIT_VIOLATED, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


class UsageError(Exception):
    pass


def _num(x):
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if not math.isfinite(x):
        return "null"
    return format(x + 0.0, ".17g")


def dumps(obj) -> str:
    """JSON with every float written to 17 significant digits."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    if isinstance(obj, str):
        return json.dumps(obj)
    if hasattr(obj, "item"):
        obj = obj.item()
    return _num(obj)


def _emit(obj):
    sys.stdout.write(dumps(obj) + "\n")


def _csv_out(header, rows, path=None):
    from .meshio import fmt

    lines = [",".join(header)]
    lines += [",".join(fmt(v) if isinstance(v, float) else str(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _load_mesh(path):
    from .meshio import read_mesh

    if not Path(path).is_file():
        raise UsageError(f"mesh file not found: {path}")
    return read_mesh(path)


# --------------------------------------------------------------------------
# commands


SHAPE_FLAGS = ("r", "subdiv", "a", "l", "edge", "resolution")


def cmd_shape(args):
    from .errors import BadParams, UnknownShape
    from .meshio import write_boundary_csv, write_mesh
    from .shapes import SHAPES

    if args.name not in SHAPES:
        raise UnknownShape(f"unknown shape {args.name!r}; choose from {', '.join(sorted(SHAPES))}")
    ctor = SHAPES[args.name]
    accepted = set(inspect.signature(ctor).parameters)
    kwargs = {}
    for flag in SHAPE_FLAGS:
        val = getattr(args, flag)
        if val is None:
            continue
        key = "subdivisions" if flag == "subdiv" else flag
        if key not in accepted:
            raise BadParams(f"shape {args.name!r} does not take --{flag}")
        kwargs[key] = val
    result = ctor(**kwargs)
    beta = None
    if isinstance(result, tuple):
        result, beta = result
    write_mesh(result, args.out)
    if args.boundary:
        if beta is None:
            raise BadParams(f"shape {args.name!r} has no boundary atoms")
        write_boundary_csv(beta, args.boundary)
    print(f"faces {result.n_faces} vertices {result.n_vertices}")
    return EXIT_OK


def cmd_report(args):
    from .functionals import energy_report

    mesh = _load_mesh(args.mesh)
    coarser = _load_mesh(args.coarser) if args.coarser else None
    _emit(energy_report(mesh, args.c0, coarser).to_dict())
    return EXIT_OK


def cmd_liyau(args):
    import numpy as np

    from .liyau import liyau_bound, probe_points
    from .meshio import read_boundary_csv

    mesh = _load_mesh(args.mesh)
    beta = read_boundary_csv(args.beta) if args.beta else None
    if args.probe_auto:
        points = [mesh.vertices[i] for i in probe_points(mesh, args.probes)]
    elif args.x0 is not None:
        points = [np.array(args.x0)]
    else:
        raise UsageError("give --x0 X Y Z or --probe-auto")
    certs = [liyau_bound(mesh, args.c0, x, args.tol, beta=beta) for x in points]
    if args.probe_auto:
        worst = max(certs, key=lambda c: (c.measured_multiplicity - c.bound, c.measured_multiplicity))
        _emit({"n_probes": len(certs), "worst": worst.to_dict(),
               "verdict": "violated" if any(c.verdict == "violated" for c in certs) else "consistent"})
    else:
        _emit(certs[0].to_dict())
    return EXIT_VIOLATED if any(c.verdict == "violated" for c in certs) else EXIT_OK


def cmd_monotonicity(args):
    import numpy as np

    from .liyau import monotonicity_profile
    from .meshio import read_boundary_csv

    mesh = _load_mesh(args.mesh)
    if not (0 < args.rho_min < args.rho_max) or args.n < 2:
        raise UsageError("need 0 < rho-min < rho-max and n >= 2")
    rhos = np.geomspace(args.rho_min, args.rho_max, args.n)
    beta = read_boundary_csv(args.beta) if args.beta else None
    prof = monotonicity_profile(mesh, args.c0, args.x0, rhos, beta=beta)
    _csv_out(["rho", "gamma", "term1", "term2", "term3", "term4", "term5"], list(prof.rows()), args.out)
    return EXIT_OK


def _start_mesh(start, base: Path):
    from .shapes import SHAPES

    if isinstance(start, str):
        return _load_mesh(base / start if not Path(start).is_absolute() else start)
    if isinstance(start, dict):
        params = dict(start)
        name = params.pop("shape", None)
        if name not in SHAPES:
            raise UsageError(f"config start.shape must be one of {', '.join(sorted(SHAPES))}")
        mesh = SHAPES[name](**params)
        return mesh[0] if isinstance(mesh, tuple) else mesh
    raise UsageError("config needs a 'start' mesh path or shape object")


def cmd_minimize(args):
    from .optimize import RunConfig, hausdorff_to_sphere, minimize_constrained

    path = Path(args.config)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    raw = json.loads(path.read_text())
    cfg = RunConfig.from_json(path)
    out = Path(args.out_dir or raw.get("output_dir") or path.with_suffix(""))
    out.mkdir(parents=True, exist_ok=True)
    mesh0 = _start_mesh(raw.get("start"), path.parent)
    state = minimize_constrained(
        mesh0, cfg.c0, cfg.A0, cfg.V0, max_iter=cfg.max_iter, step0=cfg.step0, tol=cfg.tol,
        log_path=out / "log.csv", checkpoint_dir=out, checkpoint_every=int(raw.get("checkpoint_every", 0)),
    )
    (out / "config.json").write_text(dumps(cfg.to_dict()) + "\n")
    _emit({
        "stop_reason": state.stop_reason,
        "iterations": state.iteration,
        "energy": state.energy,
        "residual_area": state.residuals[0],
        "residual_volume": state.residuals[1],
        "effective_A0": state.A0,
        "effective_V0": state.V0,
        "worst_bound": state.worst_bound,
        "min_sheet_distance": state.min_sheet_distance,
        "sphere_deviation": hausdorff_to_sphere(state.mesh, math.sqrt(state.A0 / (4 * math.pi))),
    })
    return EXIT_OK


def cmd_sweep(args):
    from .functionals import helfrich_energy
    from .optimize import penalized_sweep
    from .shapes import dumbbell

    path = Path(args.spec)
    if not path.is_file():
        raise UsageError(f"sweep spec not found: {path}")
    text = path.read_text().strip()
    spec = json.loads(text) if text else {}
    if not spec:
        raise UsageError("empty sweep spec")
    kind = spec.get("kind")
    if kind == "penalized":
        rows = penalized_sweep(spec["c0"], spec.get("lam", 0.0), spec.get("p", 0.0), spec["radii"],
                               spec.get("subdivisions", 4))
        _csv_out(["r", "penalized_energy"], rows, args.out)
    elif kind == "neck":
        c0 = spec.get("c0", 2.0)
        rows = []
        for a in spec["a"]:
            m = dumbbell(a, spec.get("l", 0.0), spec.get("r", 1.0), spec.get("resolution", 0.05))
            rows.append((float(a), helfrich_energy(m, c0)))
        _csv_out(["a", "helfrich"], rows, args.out)
    else:
        raise UsageError("sweep spec 'kind' must be 'penalized' or 'neck'")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="helfrich", description="Helfrich energy, concentrated volume and Li-Yau tools")
    p.add_argument("--threads", type=int, default=None, help="cap on BLAS/OpenMP threads (default: $HELFRICH_THREADS)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("shape", help="build a mesh")
    s.add_argument("name")
    for flag, typ in (("r", float), ("subdiv", int), ("a", float), ("l", float), ("edge", float), ("resolution", float)):
        s.add_argument(f"--{flag}", type=typ)
    s.add_argument("--out", required=True)
    s.add_argument("--boundary", help="CSV path for boundary atoms (lens)")
    s.set_defaults(func=cmd_shape)

    s = sub.add_parser("report", help="energy report as JSON")
    s.add_argument("mesh")
    s.add_argument("--c0", type=float, default=0.0)
    s.add_argument("--coarser", help="same shape one refinement level down, for error estimates")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("liyau", help="Li-Yau certificate as JSON")
    s.add_argument("mesh")
    s.add_argument("--c0", type=float, default=0.0)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--x0", type=float, nargs=3)
    g.add_argument("--probe-auto", action="store_true")
    s.add_argument("--probes", type=int, default=64)
    s.add_argument("--tol", type=float, default=1e-4)
    s.add_argument("--beta", help="boundary atoms CSV")
    s.set_defaults(func=cmd_liyau)

    s = sub.add_parser("monotonicity", help="monotonicity profile as CSV")
    s.add_argument("mesh")
    s.add_argument("--c0", type=float, default=0.0)
    s.add_argument("--x0", type=float, nargs=3, required=True)
    s.add_argument("--rho-min", type=float, required=True)
    s.add_argument("--rho-max", type=float, required=True)
    s.add_argument("--n", type=int, default=9)
    s.add_argument("--beta")
    s.add_argument("--out")
    s.set_defaults(func=cmd_monotonicity)

    s = sub.add_parser("minimize", help="constrained minimisation from a JSON config")
    s.add_argument("config")
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_minimize)

    s = sub.add_parser("sweep", help="parameter sweep from a JSON spec, CSV out")
    s.add_argument("spec")
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)
    return p


def _apply_threads(n):
    if n is None:
        env = os.environ.get("HELFRICH_THREADS")
        n = int(env) if env else None
    if n is None:
        return
    if n < 1:
        raise UsageError("--threads must be >= 1")
    for var in _THREAD_VARS:
        os.environ[var] = str(n)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_threads(args.threads)
        from .errors import NumericalError

        try:
            return args.func(args)
        except NumericalError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
    except (UsageError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

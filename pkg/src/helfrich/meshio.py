"""Plain-text geometry and table I/O: OBJ/OFF meshes, atom CSVs, profiles."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .mesh import TriangleImmersion, build_immersion
from .varifold import BoundaryAtoms, OrientedVarifoldAtoms


def fmt(x) -> str:
    """Number with 17 significant digits (round-trips a float64)."""
    return format(float(x) + 0.0, ".17g")


def write_obj(mesh: TriangleImmersion, path) -> None:
    lines = [f"v {fmt(a)} {fmt(b)} {fmt(c)}" for a, b, c in mesh.vertices]
    lines += [f"f {i + 1} {j + 1} {k + 1}" for i, j, k in mesh.faces]
    Path(path).write_text("\n".join(lines) + "\n")


def read_obj(path, validate: bool = True) -> TriangleImmersion:
    verts, faces = [], []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(t) for t in parts[1:4]])
        elif parts[0] == "f":
            idx = [int(t.split("/")[0]) for t in parts[1:]]
            idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
            # fan-triangulate polygons
            faces.extend([idx[0], idx[k], idx[k + 1]] for k in range(1, len(idx) - 1))
    if not verts or not faces:
        raise ValueError(f"{path}: no vertices or faces")
    return build_immersion(np.array(verts), np.array(faces), validate=validate)


def write_off(mesh: TriangleImmersion, path) -> None:
    lines = ["OFF", f"{mesh.n_vertices} {mesh.n_faces} 0"]
    lines += [f"{fmt(a)} {fmt(b)} {fmt(c)}" for a, b, c in mesh.vertices]
    lines += [f"3 {i} {j} {k}" for i, j, k in mesh.faces]
    Path(path).write_text("\n".join(lines) + "\n")


def read_off(path, validate: bool = True) -> TriangleImmersion:
    tokens = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.append(line.split())
    if not tokens or tokens[0][0] != "OFF":
        raise ValueError(f"{path}: missing OFF header")
    head = tokens[0][1:] or tokens[1]
    body = tokens[1:] if tokens[0][1:] else tokens[2:]
    nv, nf = int(head[0]), int(head[1])
    verts = np.array([[float(t) for t in row[:3]] for row in body[:nv]])
    faces = []
    for row in body[nv : nv + nf]:
        k = int(row[0])
        idx = [int(t) for t in row[1 : k + 1]]
        faces.extend([idx[0], idx[j], idx[j + 1]] for j in range(1, k - 1))
    return build_immersion(verts, np.array(faces), validate=validate)


def read_mesh(path, validate: bool = True) -> TriangleImmersion:
    path = Path(path)
    if path.suffix.lower() == ".off":
        return read_off(path, validate)
    return read_obj(path, validate)


def write_mesh(mesh: TriangleImmersion, path) -> None:
    if Path(path).suffix.lower() == ".off":
        write_off(mesh, path)
    else:
        write_obj(mesh, path)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _read_table(path, ncols):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        return np.zeros((0, ncols))
    if data.shape[1] != ncols:
        raise ValueError(f"{path}: expected {ncols} columns, found {data.shape[1]}")
    return data


def write_atoms_csv(V: OrientedVarifoldAtoms, path) -> None:
    rows = np.hstack([V.points, V.normals, V.weights[:, None]])
    write_csv(path, ["x", "y", "z", "nx", "ny", "nz", "w"], rows.tolist())


def read_atoms_csv(path) -> OrientedVarifoldAtoms:
    d = _read_table(path, 7)
    return OrientedVarifoldAtoms(d[:, 0:3].copy(), d[:, 3:6].copy(), d[:, 6].copy(), source=str(path))


def write_boundary_csv(beta: BoundaryAtoms, path) -> None:
    rows = np.hstack([beta.points, beta.directions, beta.weights[:, None]])
    write_csv(path, ["x", "y", "z", "etax", "etay", "etaz", "w"], rows.tolist())


def read_boundary_csv(path) -> BoundaryAtoms:
    d = _read_table(path, 7)
    return BoundaryAtoms(d[:, 0:3].copy(), d[:, 3:6].copy(), d[:, 6].copy())

"""Closed oriented triangle immersions and their discrete differential geometry.

Orientation convention: a face ``(i, j, k)`` has normal
``(x_j - x_i) x (x_k - x_i)`` normalised, and closed surfaces are wound so that
this is the *inner* normal.  With that choice the round sphere has positive
scalar mean curvature ``+2/r`` and positive algebraic volume.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.spatial import ConvexHull, QhullError

from .errors import (
    DegenerateFace,
    InconsistentOrientation,
    MeshError,
    NonManifoldEdge,
    NonPositiveScale,
    NumericalDegeneracy,
)

DEGENERATE_REL = 1e-12
COT_CAP = 1e8


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TriangleImmersion:
    """Validated closed, consistently oriented triangle mesh.

    Instances are immutable; use :func:`build_immersion` to construct one.
    """

    vertices: np.ndarray
    faces: np.ndarray

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @cached_property
    def corners(self) -> np.ndarray:
        """Face corner positions, shape (m, 3, 3)."""
        return self.vertices[self.faces]

    @cached_property
    def _face_cross(self) -> np.ndarray:
        p = self.corners
        return np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])

    @cached_property
    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self._face_cross, axis=1)

    @cached_property
    def face_normals(self) -> np.ndarray:
        return self._face_cross / (2.0 * self.face_areas[:, None])

    @cached_property
    def face_centroids(self) -> np.ndarray:
        return self.corners.mean(axis=1)

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted index pairs, shape (E, 2)."""
        e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    @cached_property
    def mean_edge_length(self) -> float:
        e = self.edges
        return float(np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1).mean())

    @cached_property
    def vertex_areas(self) -> np.ndarray:
        """Barycentric vertex areas (one third of each incident face)."""
        a = np.repeat(self.face_areas / 3.0, 3)
        return np.bincount(self.faces.ravel(), weights=a, minlength=self.n_vertices)

    @cached_property
    def vertex_normals(self) -> np.ndarray:
        """Area-weighted average of incident face normals, normalised."""
        n = np.zeros((self.n_vertices, 3))
        fc = self._face_cross
        for c in range(3):
            n[:, c] = np.bincount(self.faces.ravel(), weights=np.repeat(fc[:, c], 3), minlength=self.n_vertices)
        return n / np.linalg.norm(n, axis=1)[:, None]

    @cached_property
    def vertex_adjacency(self) -> sparse.csr_matrix:
        e = self.edges
        n = self.n_vertices
        data = np.ones(2 * len(e), dtype=np.int8)
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        return sparse.csr_matrix((data, (rows, cols)), shape=(n, n))

    @cached_property
    def face_adjacency(self) -> np.ndarray:
        """Pairs of faces sharing an edge, shape (E, 2)."""
        m = self.n_faces
        e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        owner = np.tile(np.arange(m), 3)
        key = np.sort(e, axis=1)
        order = np.lexsort((key[:, 1], key[:, 0]))
        f = owner[order].reshape(-1, 2)
        return f

    @cached_property
    def component_labels(self) -> np.ndarray:
        fa = self.face_adjacency
        m = self.n_faces
        g = sparse.coo_matrix((np.ones(len(fa)), (fa[:, 0], fa[:, 1])), shape=(m, m))
        _, labels = csgraph.connected_components(g, directed=False)
        return labels

    @cached_property
    def curvature(self) -> "CurvatureField":
        return mean_curvature(self)

    @property
    def n_components(self) -> int:
        return int(self.component_labels.max()) + 1

    def __repr__(self):
        return f"TriangleImmersion(n_vertices={self.n_vertices}, n_faces={self.n_faces})"


def build_immersion(vertices, faces, *, validate: bool = True) -> TriangleImmersion:
    """Validate ``vertices``/``faces`` and return an immutable mesh.

    Raises :class:`NonManifoldEdge` for open or non-manifold edges,
    :class:`InconsistentOrientation` when two faces traverse a shared edge in
    the same direction, and :class:`DegenerateFace` for (near) zero-area faces.
    """
    v = np.asarray(vertices, dtype=np.float64)
    f = np.asarray(faces, dtype=np.int64)
    if v.ndim != 2 or v.shape[1] != 3 or len(v) == 0:
        raise MeshError("vertices must be a non-empty (n, 3) array")
    if f.ndim != 2 or f.shape[1] != 3 or len(f) == 0:
        raise MeshError("faces must be a non-empty (m, 3) index array")
    if f.min() < 0 or f.max() >= len(v):
        bad = int(np.flatnonzero((f < 0).any(axis=1) | (f >= len(v)).any(axis=1))[0])
        raise MeshError(f"face {bad} has a vertex index out of range")
    mesh = TriangleImmersion(_readonly(v), _readonly(f))
    if validate:
        _validate(mesh)
    return mesh


def _validate(mesh: TriangleImmersion) -> None:
    f = mesh.faces
    m = len(f)
    repeated = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 2] == f[:, 0])
    if repeated.any():
        bad = int(np.flatnonzero(repeated)[0])
        raise DegenerateFace(f"face {bad} repeats a vertex index: {f[bad].tolist()}")

    directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    owner = np.tile(np.arange(m), 3)
    undirected = np.sort(directed, axis=1)
    _, inv, counts = np.unique(undirected, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    if (counts != 2).any():
        k = int(np.flatnonzero(counts[inv] != 2)[0])
        edge = undirected[k].tolist()
        kind = "open (boundary)" if counts[inv[k]] == 1 else "non-manifold"
        raise NonManifoldEdge(f"edge {edge} of face {int(owner[k])} is {kind}: used by {int(counts[inv[k]])} faces")
    _, dcounts = np.unique(directed, axis=0, return_counts=True)
    if (dcounts != 1).any():
        _, dinv, dcnt = np.unique(directed, axis=0, return_inverse=True, return_counts=True)
        k = int(np.flatnonzero(dcnt[dinv.ravel()] > 1)[0])
        raise InconsistentOrientation(
            f"edge {directed[k].tolist()} is traversed in the same direction by two faces (one is face {int(owner[k])})"
        )

    areas = mesh.face_areas
    thresh = DEGENERATE_REL * areas.mean()
    if (areas <= thresh).any():
        bad = int(np.flatnonzero(areas <= thresh)[0])
        raise DegenerateFace(f"face {bad} has area {areas[bad]:.3e} below {thresh:.3e}")


def flip_orientation(mesh: TriangleImmersion) -> TriangleImmersion:
    """Reverse every face winding (replaces the normal n by -n)."""
    return TriangleImmersion(mesh.vertices, _readonly(mesh.faces[:, ::-1]))


def with_vertices(mesh: TriangleImmersion, vertices) -> TriangleImmersion:
    """Same connectivity, new positions (no topology re-validation)."""
    v = np.asarray(vertices, dtype=np.float64)
    if v.shape != mesh.vertices.shape:
        raise MeshError("vertex array shape does not match the mesh")
    return TriangleImmersion(_readonly(v), mesh.faces)


def merge(*meshes: TriangleImmersion) -> TriangleImmersion:
    """Disjoint union of meshes in one vertex/face list."""
    verts, faces, off = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + off)
        off += m.n_vertices
    return build_immersion(np.concatenate(verts), np.concatenate(faces))


def transform(mesh: TriangleImmersion, scale: float = 1.0, translation=(0.0, 0.0, 0.0)) -> TriangleImmersion:
    """Map every vertex ``x -> scale * x + translation``."""
    if not scale > 0:
        raise NonPositiveScale(f"scale must be positive, got {scale}")
    t = np.asarray(translation, dtype=np.float64).reshape(3)
    return with_vertices(mesh, scale * mesh.vertices + t)


# --------------------------------------------------------------------------
# curvature


@dataclass(frozen=True)
class CurvatureField:
    """Per-vertex mean curvature data.

    ``H`` is the mean curvature vector (trace of the second fundamental form),
    ``H_sc = <H, n>`` with ``n`` the inner vertex normal, ``area`` the
    barycentric vertex area.
    """

    H: np.ndarray
    H_sc: np.ndarray
    area: np.ndarray
    normals: np.ndarray


def cotangents(mesh: TriangleImmersion) -> np.ndarray:
    """Cotangent of each face corner angle, shape (m, 3)."""
    p = mesh.corners
    cots = np.empty((mesh.n_faces, 3))
    dbl_area = 2.0 * mesh.face_areas
    for c in range(3):
        u = p[:, (c + 1) % 3] - p[:, c]
        w = p[:, (c + 2) % 3] - p[:, c]
        cots[:, c] = np.einsum("ij,ij->i", u, w) / dbl_area
    return cots


def cotan_laplacian_of_positions(mesh: TriangleImmersion) -> np.ndarray:
    """``sum_j (cot a_ij + cot b_ij)(x_j - x_i)`` per vertex, shape (n, 3)."""
    cots = cotangents(mesh)
    worst = np.abs(cots).max()
    if worst > COT_CAP:
        bad = int(np.unravel_index(np.abs(cots).argmax(), cots.shape)[0])
        raise NumericalDegeneracy(f"cotangent weight {worst:.3e} exceeds {COT_CAP:.0e} on face {bad} (sliver triangle)")
    f = mesh.faces
    x = mesh.vertices
    n = mesh.n_vertices
    out = np.zeros((n, 3))
    for c in range(3):
        i = f[:, (c + 1) % 3]
        j = f[:, (c + 2) % 3]
        d = cots[:, c, None] * (x[j] - x[i])
        for k in range(3):
            out[:, k] += np.bincount(i, weights=d[:, k], minlength=n)
            out[:, k] -= np.bincount(j, weights=d[:, k], minlength=n)
    return out


def mean_curvature(mesh: TriangleImmersion) -> CurvatureField:
    """Cotangent-Laplacian mean curvature with barycentric vertex areas."""
    area = mesh.vertex_areas
    H = cotan_laplacian_of_positions(mesh) / (2.0 * area[:, None])
    normals = mesh.vertex_normals
    H_sc = np.einsum("ij,ij->i", H, normals)
    return CurvatureField(H=H, H_sc=H_sc, area=area, normals=normals)


# --------------------------------------------------------------------------
# global quantities


def total_area(mesh: TriangleImmersion) -> float:
    return float(np.sum(mesh.face_areas))


def algebraic_volume(mesh: TriangleImmersion) -> float:
    """``-(1/3) * sum <centroid, n> area`` over faces."""
    s = np.einsum("ij,ij->i", mesh.face_centroids, mesh.face_normals) * mesh.face_areas
    return float(-np.sum(s) / 3.0)


def diameter(mesh: TriangleImmersion) -> float:
    """Exact maximum pairwise vertex distance (over convex hull vertices)."""
    pts = mesh.vertices
    if len(pts) > 8:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:
            pass
    best = 0.0
    for start in range(0, len(pts), 512):
        block = pts[start : start + 512]
        d2 = ((block[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1)
        best = max(best, float(d2.max()))
    return float(np.sqrt(best))


def point_triangle_distance(p, tri: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distance from point ``p`` to each triangle in ``tri`` (k, 3, 3).

    Returns ``(distance, closest_point)``.  Vectorised closest-point-on-
    triangle via Voronoi region classification.
    """
    p = np.asarray(p, dtype=np.float64)
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    out = np.empty_like(a)
    done = np.zeros(len(a), dtype=bool)

    def assign(mask, val):
        m = mask & ~done
        out[m] = val[m]
        done[m] = True

    with np.errstate(divide="ignore", invalid="ignore"):
        assign((d1 <= 0) & (d2 <= 0), a)
        assign((d3 >= 0) & (d4 <= d3), b)
        t = d1 / (d1 - d3)
        assign((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + t[:, None] * ab)
        assign((d6 >= 0) & (d5 <= d6), c)
        t = d2 / (d2 - d6)
        assign((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + t[:, None] * ac)
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        assign((va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0), b + t[:, None] * (c - b))
        denom = va + vb + vc
        v = vb / denom
        w = vc / denom
        assign(np.ones(len(a), dtype=bool), a + v[:, None] * ab + w[:, None] * ac)
    return np.linalg.norm(out - p, axis=1), out


def multiplicity_at(mesh: TriangleImmersion, x0, eps: float | None = None) -> int:
    """Discrete sheet count of the surface at ``x0``.

    Faces meeting the spherical shell ``eps/2 <= |x - x0| < eps`` are grouped
    into clusters connected through shared vertices; the number of clusters
    is returned (0 when no face comes within ``eps``).  Using the shell rather
    than the full ball lets a neck narrower than ``eps/2`` count as two
    sheets, which is how the surface reads at resolution ``eps``.
    """
    if eps is None:
        eps = 2.0 * mesh.mean_edge_length
    if not eps > 0:
        raise ValueError("eps must be positive")
    x0 = np.asarray(x0, dtype=np.float64)
    d_min, _ = point_triangle_distance(x0, mesh.corners)
    d_max = np.linalg.norm(mesh.corners - x0, axis=2).max(axis=1)
    sel = np.flatnonzero((d_min < eps) & (d_max >= 0.5 * eps))
    if len(sel) == 0:
        near = np.flatnonzero(d_min < eps)
        if len(near) == 0:
            return 0
        # every nearby face lies inside the inner shell radius
        return _count_vertex_connected(mesh.faces[near], mesh.n_vertices)
    return _count_vertex_connected(mesh.faces[sel], mesh.n_vertices)


def _count_vertex_connected(faces: np.ndarray, n_vertices: int) -> int:
    k = len(faces)
    rows = np.repeat(np.arange(k), 3)
    inc = sparse.csr_matrix((np.ones(3 * k), (rows, faces.ravel())), shape=(k, n_vertices))
    g = inc @ inc.T
    n, _ = csgraph.connected_components(g, directed=False)
    return int(n)

"""Conforming triangulations: structured refinement of explicit cell lists,
matched meshing of copy layouts, and the 1D interval meshes.

1D convention: the same ``Mesh`` container holds interval meshes with
``vertices`` of shape (n, 1), two-vertex segment cells, and single-vertex
boundary facets.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryInvalid, MeshGluingError, MeshInvalid
from .geometry import CopyLayout, Triangle

MERGE_TOL = 1e-9


@dataclass(frozen=True)
class Mesh:
    """Simplicial mesh: triangles in the plane or segments on the line.

    ``boundary_facets`` lists (vertex index tuple, tag); a facet is an edge
    in 2D and a single vertex in 1D.
    """

    vertices: np.ndarray
    cells: np.ndarray
    boundary_facets: tuple

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        c = np.asarray(self.cells, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] not in (1, 2):
            raise MeshInvalid("vertices must have shape (n, 1) or (n, 2)")
        if c.ndim != 2 or c.shape[1] != v.shape[1] + 1:
            raise MeshInvalid("cell arity does not match vertex dimension")
        if c.size and (c.min() < 0 or c.max() >= len(v)):
            raise MeshInvalid("cell vertex index out of range")
        bf = tuple((tuple(int(i) for i in f), str(tag)) for f, tag in self.boundary_facets)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "cells", c)
        object.__setattr__(self, "boundary_facets", bf)
        v.setflags(write=False)
        c.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def cell_measures(self) -> np.ndarray:
        """Signed areas (2D) or lengths (1D) per cell."""
        if self.dim == 1:
            a = self.vertices[self.cells[:, 0], 0]
            b = self.vertices[self.cells[:, 1], 0]
            return b - a
        p = self.vertices[self.cells]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def total_measure(self) -> float:
        return float(np.sum(np.abs(self.cell_measures())))

    def mesh_size(self) -> float:
        """Largest cell diameter."""
        if self.dim == 1:
            return float(np.max(np.abs(self.cell_measures())))
        p = self.vertices[self.cells]
        d = [np.linalg.norm(p[:, i] - p[:, j], axis=1) for i, j in ((0, 1), (1, 2), (2, 0))]
        return float(np.max(d))

    def boundary_vertex_ids(self) -> np.ndarray:
        ids = sorted({i for f, _ in self.boundary_facets for i in f})
        return np.array(ids, dtype=np.int64)

    def interior_vertex_ids(self) -> np.ndarray:
        onb = np.zeros(self.n_vertices, dtype=bool)
        b = self.boundary_vertex_ids()
        if b.size:
            onb[b] = True
        return np.nonzero(~onb)[0]

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.vertices).tobytes())
        h.update(np.ascontiguousarray(self.cells).tobytes())
        h.update(repr(self.boundary_facets).encode())
        return h.hexdigest()[:16]

    def to_json(self) -> dict:
        return {
            "vertices": self.vertices.tolist(),
            "cells": self.cells.tolist(),
            "boundary": [[list(f), tag] for f, tag in self.boundary_facets],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Mesh":
        return cls(
            np.asarray(doc["vertices"], dtype=float),
            np.asarray(doc["cells"], dtype=np.int64),
            tuple((tuple(f), tag) for f, tag in doc["boundary"]),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> "Mesh":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def save_adjacency_mm(self, path):
        """Cell-vertex incidence in Matrix Market coordinate format."""
        from scipy.io import mmwrite
        from scipy.sparse import coo_matrix

        rows = np.repeat(np.arange(self.n_cells), self.cells.shape[1])
        cols = self.cells.ravel()
        inc = coo_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(self.n_cells, self.n_vertices)
        )
        mmwrite(str(path), inc)


def _edge_key(i, j):
    return (i, j) if i < j else (j, i)


def audit_conformity(m: Mesh) -> None:
    """Raise MeshInvalid unless the mesh is conforming.

    Every interior facet must have exactly two incident cells and the
    declared boundary facets must be exactly the one-cell facets.
    """
    meas = m.cell_measures()
    if m.dim == 2 and np.any(meas <= 0):
        raise MeshInvalid("cell with non-positive area (orientation or degeneracy)")
    if m.dim == 1 and np.any(meas <= 0):
        raise MeshInvalid("segment with non-positive length")
    count = {}
    if m.dim == 2:
        for tri in m.cells:
            for a, b in ((0, 1), (1, 2), (2, 0)):
                k = _edge_key(int(tri[a]), int(tri[b]))
                count[k] = count.get(k, 0) + 1
    else:
        for seg in m.cells:
            for v in seg:
                count[(int(v),)] = count.get((int(v),), 0) + 1
    bad = [k for k, c in count.items() if c > 2]
    if bad:
        raise MeshInvalid(f"facet {bad[0]} shared by more than two cells")
    declared = {tuple(sorted(f)) for f, _ in m.boundary_facets}
    actual = {k if isinstance(k, tuple) else (k,) for k, c in count.items() if c == 1}
    actual = {tuple(sorted(k)) for k in actual}
    if declared != actual:
        raise MeshInvalid(
            f"boundary facets disagree with one-cell facets "
            f"(declared {len(declared)}, actual {len(actual)})"
        )


def mesh_triangle(t: Triangle, levels: int = 0) -> Mesh:
    """Uniform red refinement of the single-cell mesh of ``t``.

    Boundary edges carry tags "e0", "e1", "e2" naming the template edge they
    lie on, so layout meshing can sort glued from outer edges.
    """
    if levels < 0:
        raise MeshInvalid("levels must be nonnegative")
    verts = t.verts if t.orientation > 0 else t.verts[[0, 2, 1]]
    tagmap = {0: "e0", 1: "e1", 2: "e2"} if t.orientation > 0 else {0: "e2", 1: "e1", 2: "e0"}
    m = Mesh(
        verts,
        np.array([[0, 1, 2]]),
        tuple(((i, (i + 1) % 3), tagmap[i]) for i in range(3)),
    )
    for _ in range(levels):
        m = refine(m)
    return m


def refine(m: Mesh) -> Mesh:
    """One sweep of red refinement: 4 children per triangle, 2 per segment."""
    if m.dim == 1:
        verts = [m.vertices]
        mids = 0.5 * (m.vertices[m.cells[:, 0]] + m.vertices[m.cells[:, 1]])
        base = m.n_vertices
        verts.append(mids)
        cells = []
        for c, seg in enumerate(m.cells):
            mid = base + c
            cells.append([seg[0], mid])
            cells.append([mid, seg[1]])
        return Mesh(np.vstack(verts), np.array(cells), m.boundary_facets)

    midpoint = {}
    verts = [v for v in m.vertices]

    def midpt(i, j):
        k = _edge_key(i, j)
        if k not in midpoint:
            verts.append(0.5 * (m.vertices[i] + m.vertices[j]))
            midpoint[k] = len(verts) - 1
        return midpoint[k]

    cells = []
    for a, b, c in m.cells:
        ab, bc, ca = midpt(a, b), midpt(b, c), midpt(c, a)
        cells.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]])
    bnd = []
    for (i, j), tag in m.boundary_facets:
        mid = midpoint[_edge_key(i, j)]
        bnd.append(((i, mid), tag))
        bnd.append(((mid, j), tag))
    return Mesh(np.array(verts), np.array(cells), tuple(bnd))


def mesh_interval(a: float, b: float, n: int) -> Mesh:
    """Uniform 1D mesh of (a, b) with n segments."""
    if n < 2:
        raise MeshInvalid("interval mesh needs at least two segments")
    if not a < b:
        raise MeshInvalid("interval requires a < b")
    x = np.linspace(a, b, n + 1).reshape(-1, 1)
    cells = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    bnd = (((0,), "dirichlet"), ((n,), "dirichlet"))
    return Mesh(x, cells, bnd)


def mesh_rectangle(p0, p1, nx: int, ny: int) -> Mesh:
    """Structured triangulation of an axis-aligned rectangle."""
    if nx < 1 or ny < 1:
        raise MeshInvalid("need at least one cell per direction")
    x0, y0 = map(float, p0)
    x1, y1 = map(float, p1)
    if not (x0 < x1 and y0 < y1):
        raise MeshInvalid("rectangle corners must be ordered")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    verts = np.column_stack([gx.ravel(), gy.ravel()])

    def vid(i, j):
        return i * (ny + 1) + j

    cells = []
    for i in range(nx):
        for j in range(ny):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            cells.append([v00, v10, v11])
            cells.append([v00, v11, v01])
    bnd = []
    for i in range(nx):
        bnd.append(((vid(i, 0), vid(i + 1, 0)), "dirichlet"))
        bnd.append(((vid(i + 1, ny), vid(i, ny)), "dirichlet"))
    for j in range(ny):
        bnd.append(((vid(nx, j), vid(nx, j + 1)), "dirichlet"))
        bnd.append(((vid(0, j + 1), vid(0, j)), "dirichlet"))
    return Mesh(verts, np.array(cells), tuple(bnd))


def mesh_convex_polygon(ring: np.ndarray, levels: int = 0) -> Mesh:
    """Fan triangulation of a convex polygon from its centroid, refined."""
    ring = np.asarray(ring, dtype=float)
    k = len(ring)
    if k < 3:
        raise MeshInvalid("polygon needs at least three vertices")
    centroid = ring.mean(axis=0)
    verts = np.vstack([ring, centroid])
    cells = np.array([[i, (i + 1) % k, k] for i in range(k)])
    if np.any(Mesh(verts, cells, ()).cell_measures() <= 0):
        raise GeometryInvalid("polygon is not convex counterclockwise")
    bnd = tuple(((i, (i + 1) % k), "dirichlet") for i in range(k))
    m = Mesh(verts, cells, bnd)
    for _ in range(levels):
        m = refine(m)
    audit_conformity(m)
    return m


def smooth_interior(m: Mesh, iterations: int = 10) -> Mesh:
    """Laplacian relaxation of interior vertices; boundary left in place.

    Produces a mesh with the same connectivity but independently placed
    interior nodes, useful as a discretization not matched to any sibling
    mesh.
    """
    if m.dim != 2:
        raise MeshInvalid("smoothing is defined for triangle meshes")
    nbrs = [set() for _ in range(m.n_vertices)]
    for a, b, c in m.cells:
        nbrs[a].update((b, c))
        nbrs[b].update((a, c))
        nbrs[c].update((a, b))
    interior = m.interior_vertex_ids()
    v = m.vertices.copy()
    for _ in range(iterations):
        new = v.copy()
        for i in interior:
            new[i] = np.mean(v[sorted(nbrs[i])], axis=0)
        v = new
    out = Mesh(v, m.cells, m.boundary_facets)
    audit_conformity(out)
    return out


@dataclass(frozen=True)
class NodeCorrespondence:
    """Per-copy bijections from template-mesh vertices to layout-mesh vertices."""

    maps: dict
    orientations: dict
    template_mesh: Mesh = field(repr=False, default=None)

    def copy_vertex_ids(self, i: int) -> np.ndarray:
        return self.maps[i]

    def check(self, layout: CopyLayout, layout_mesh: Mesh, tol: float = 1e-10) -> None:
        """Verify layout vertex = iso_i^-1(template vertex) to ``tol``."""
        tv = self.template_mesh.vertices
        for i, ids in self.maps.items():
            back = layout.copies[i].inverse().apply(tv)
            err = np.max(np.abs(back - layout_mesh.vertices[ids]))
            if err > tol:
                raise MeshGluingError(f"copy {i} correspondence off by {err:.3e}")


def mesh_layout(layout: CopyLayout, levels: int = 0) -> tuple[Mesh, NodeCorrespondence]:
    """Matched mesh of a copy layout.

    One template mesh is transported through every copy isometry.  Vertices
    merge exactly where the gluing records demand it (both copies reference
    the same template vertex on the shared edge); geometric coincidences not
    backed by a gluing record are kept distinct, so a layout whose copies
    touch along an un-glued edge meshes as a slit domain, faithfully to the
    glued-copy structure.  Outer boundary edges are tagged "dirichlet".
    """
    tm = mesh_triangle(layout.template, levels)
    boundary_set = set(layout.boundary_edges())
    copy_ids = sorted(layout.copies)
    nt = tm.n_vertices

    # template vertex ids sitting on each template edge
    edge_of_tag = {"e0": 0, "e1": 1, "e2": 2}
    on_edge = {e: set() for e in range(3)}
    for (a, b), tag in tm.boundary_facets:
        on_edge[edge_of_tag[tag]].update((a, b))

    # union-find over (copy, template vertex) pairs, merged along gluings
    parent = list(range(len(copy_ids) * nt))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[max(rx, ry)] = min(rx, ry)

    slot = {i: k * nt for k, i in enumerate(copy_ids)}
    for gi, ge, gj, gf in layout.gluing:
        if gf != ge:
            raise MeshGluingError("gluing must identify equal template edge labels")
        for v in on_edge[ge]:
            union(slot[gi] + v, slot[gj] + v)

    phys = {i: layout.copies[i].inverse().apply(tm.vertices) for i in copy_ids}
    verts: list[np.ndarray] = []
    root_id = {}
    maps = {}
    orientations = {}
    for i in copy_ids:
        ids = np.empty(nt, dtype=np.int64)
        for v in range(nt):
            r = find(slot[i] + v)
            if r not in root_id:
                verts.append(phys[i][v])
                root_id[r] = len(verts) - 1
            elif np.linalg.norm(phys[i][v] - verts[root_id[r]]) > MERGE_TOL:
                raise MeshGluingError(
                    f"glued vertices of copy {i} disagree beyond {MERGE_TOL}"
                )
            ids[v] = root_id[r]
        maps[i] = ids
        orientations[i] = layout.copies[i].orientation

    vertices = np.asarray(verts)
    cells = []
    for i in copy_ids:
        local = maps[i][tm.cells]
        if orientations[i] < 0:
            local = local[:, [0, 2, 1]]
        cells.append(local)
    cells = np.vstack(cells)

    bnd = []
    for i in copy_ids:
        for (a, b), tag in tm.boundary_facets:
            if (i, edge_of_tag[tag]) not in boundary_set:
                continue
            ga, gb = int(maps[i][a]), int(maps[i][b])
            if orientations[i] < 0:
                ga, gb = gb, ga
            bnd.append(((ga, gb), "dirichlet"))

    mesh = Mesh(vertices, cells, tuple(bnd))
    audit_conformity(mesh)
    nc = NodeCorrespondence(maps, orientations, tm)
    nc.check(layout, mesh)
    return mesh, nc

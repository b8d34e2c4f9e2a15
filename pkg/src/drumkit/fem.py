"""P1 assembly of the Laplace forms and the boundary-condition variants.

A ``DiscreteLaplacian`` packages the reduced stiffness and mass pair of a
generalized eigenproblem A x = lambda M x.  Dirichlet conditions are imposed
by eliminating boundary vertices from the dof set; Neumann keeps the full
matrices; Robin adds the beta-weighted boundary mass to the stiffness.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import BoundaryDataMissing, InvalidArgument, MeshInvalid
from .mesh import Mesh


def _to_csr(n, rows, cols, vals):
    m = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    m.sum_duplicates()
    m.sort_indices()
    return m


def assemble_stiffness(m: Mesh) -> sp.csr_matrix:
    """Stiffness matrix of the gradient form over all mesh vertices."""
    if m.n_cells == 0:
        raise MeshInvalid("empty mesh")
    if m.dim == 2:
        rows, cols, vals = _kernels.stiffness_triplets(m.vertices, m.cells)
    else:
        rows, cols, vals = _kernels.segment_stiffness_triplets(m.vertices, m.cells)
    return _to_csr(m.n_vertices, rows, cols, vals)


def assemble_mass(m: Mesh) -> sp.csr_matrix:
    """Consistent mass matrix over all mesh vertices."""
    if m.n_cells == 0:
        raise MeshInvalid("empty mesh")
    if m.dim == 2:
        rows, cols, vals = _kernels.mass_triplets(m.vertices, m.cells)
    else:
        rows, cols, vals = _kernels.segment_mass_triplets(m.vertices, m.cells)
    return _to_csr(m.n_vertices, rows, cols, vals)


@dataclass(frozen=True)
class BoundaryFunction:
    """Robin coefficient beta on the boundary.

    Either a constant, a per-tag dict of constants, or a callable sampled at
    boundary vertices.
    """

    spec: object = 0.0

    def sample(self, m: Mesh, facet, tag: str) -> np.ndarray:
        if callable(self.spec):
            pts = m.vertices[list(facet)]
            return np.array([float(self.spec(p)) for p in pts])
        if isinstance(self.spec, dict):
            if tag not in self.spec:
                raise BoundaryDataMissing(f"beta undefined on tag {tag!r}")
            return np.full(len(facet), float(self.spec[tag]))
        return np.full(len(facet), float(self.spec))

    def values_on_boundary(self, m: Mesh) -> dict:
        """Map boundary vertex id -> beta value."""
        out = {}
        for facet, tag in m.boundary_facets:
            vals = self.sample(m, facet, tag)
            for v, b in zip(facet, vals):
                out[int(v)] = float(b)
        return out


def assemble_boundary_mass(m: Mesh, beta) -> sp.csr_matrix:
    """Boundary mass matrix weighted by beta (zero rows at interior vertices)."""
    if not isinstance(beta, BoundaryFunction):
        beta = BoundaryFunction(beta)
    n = m.n_vertices
    if not m.boundary_facets:
        return sp.csr_matrix((n, n))
    if m.dim == 2:
        edges = np.array([f for f, _ in m.boundary_facets], dtype=np.int64)
        bvals = np.array(
            [beta.sample(m, f, tag) for f, tag in m.boundary_facets], dtype=float
        )
        rows, cols, vals = _kernels.edge_mass_triplets(m.vertices, edges, bvals)
        return _to_csr(n, rows, cols, vals)
    rows, vals = [], []
    for (v,), tag in m.boundary_facets:
        rows.append(v)
        vals.append(beta.sample(m, (v,), tag)[0])
    return _to_csr(n, np.array(rows), np.array(rows), np.array(vals))


@dataclass(frozen=True)
class DiscreteLaplacian:
    """Reduced (A, M) pair for one boundary-condition kind.

    ``dof_map`` sends a mesh vertex to its dof index, or -1 when the vertex
    was eliminated (Dirichlet boundary).
    """

    kind: str
    stiffness: sp.csr_matrix = field(repr=False)
    mass: sp.csr_matrix = field(repr=False)
    dof_map: np.ndarray
    mesh: Mesh = field(repr=False)
    beta: BoundaryFunction | None = None

    @property
    def n_dof(self) -> int:
        return self.stiffness.shape[0]

    @property
    def dof_vertices(self) -> np.ndarray:
        """Mesh vertex index of each dof, in dof order."""
        return np.nonzero(self.dof_map >= 0)[0]

    def extend(self, x: np.ndarray) -> np.ndarray:
        """Zero-extend a dof vector to all mesh vertices."""
        full = np.zeros(self.mesh.n_vertices)
        full[self.dof_vertices] = x
        return full

    def restrict(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(v)[self.dof_vertices]

    def save_mm(self, stem):
        from scipy.io import mmwrite

        mmwrite(f"{stem}_A.mtx", self.stiffness.tocoo(), symmetry="symmetric")
        mmwrite(f"{stem}_M.mtx", self.mass.tocoo(), symmetry="symmetric")
        with open(f"{stem}_meta.json", "w") as fh:
            json.dump(
                {
                    "kind": self.kind,
                    "n_dof": int(self.n_dof),
                    "mesh_hash": self.mesh.content_hash(),
                },
                fh,
            )


def build_laplacian(m: Mesh, kind: str, beta=None) -> DiscreteLaplacian:
    """Discrete Laplacian of the requested kind on mesh ``m``."""
    if kind not in ("dirichlet", "neumann", "robin"):
        raise InvalidArgument(f"unknown kind {kind!r}")
    if kind == "robin" and beta is None:
        raise InvalidArgument("robin kind requires beta")
    a = assemble_stiffness(m)
    mm = assemble_mass(m)
    if kind == "robin":
        a = (a + assemble_boundary_mass(m, beta)).tocsr()
        a.sort_indices()
    dof_map = np.arange(m.n_vertices, dtype=np.int64)
    if kind == "dirichlet":
        dof_map = np.full(m.n_vertices, -1, dtype=np.int64)
        interior = m.interior_vertex_ids()
        dof_map[interior] = np.arange(len(interior))
        a = a[interior][:, interior].tocsr()
        mm = mm[interior][:, interior].tocsr()
    bf = None
    if beta is not None:
        bf = beta if isinstance(beta, BoundaryFunction) else BoundaryFunction(beta)
    return DiscreteLaplacian(kind, a, mm, dof_map, m, bf)

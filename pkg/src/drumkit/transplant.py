"""Intertwining operators: sign-matrix transplantation between copy layouts,
the eigenbasis-matching intertwiner, and the 1D reflection fixtures."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from .errors import (
    InvalidArgument,
    MeshMismatch,
    TransplantationInconsistent,
    TransplantationNotFound,
)
from .geometry import CopyLayout

INV_SQRT3 = 1.0 / np.sqrt(3.0)


@dataclass
class OperatorMatrix:
    """Linear map between the nodal spaces of two meshes.

    ``row_vertices`` / ``col_vertices`` index into the target / source mesh
    vertex arrays, so operators on reduced (Dirichlet) spaces keep their
    geometric meaning.
    """

    matrix: object  # dense ndarray or scipy sparse
    row_vertices: np.ndarray
    col_vertices: np.ndarray
    tag: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.matrix.shape

    def dense(self) -> np.ndarray:
        m = self.matrix
        return m.toarray() if sp.issparse(m) else np.asarray(m)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v


@dataclass(frozen=True)
class TransplantationMatrix:
    """Integer sign matrix with fixed row/column sparsity.

    Invertibility over the integers is required; that (together with the
    two-sided gluing compatibility enforced by the search) is what makes the
    lifted operator an exact discrete intertwiner.  Note that a 7x7 sign
    matrix with three entries per row and column can never satisfy
    t @ t.T = 3I: orthogonal rows must share an even number of support
    columns, but the support overlaps sum to 7 * C(3,2) = 21, which is odd.
    The gram matrix t @ t.T is therefore recorded, not constrained.
    """

    t: np.ndarray
    nnz_per_row: int = 3

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.int64)
        object.__setattr__(self, "t", t)
        n = t.shape[0]
        if t.shape != (n, n):
            raise InvalidArgument("transplantation matrix must be square")
        if not np.all(np.isin(t, (-1, 0, 1))):
            raise InvalidArgument("entries must be in {-1, 0, 1}")
        if np.any(np.count_nonzero(t, axis=1) != self.nnz_per_row) or np.any(
            np.count_nonzero(t, axis=0) != self.nnz_per_row
        ):
            raise InvalidArgument(f"rows and columns must have {self.nnz_per_row} entries")
        if abs(round(np.linalg.det(t.astype(float)))) < 0.5:
            raise InvalidArgument("transplantation matrix must be invertible")
        t.setflags(write=False)

    @property
    def normalization(self) -> float:
        return 1.0 / np.sqrt(self.nnz_per_row)

    @property
    def gram(self) -> np.ndarray:
        return self.t @ self.t.T

    def to_json(self):
        return self.t.tolist()


def _edge_classes(layout: CopyLayout, e: int):
    """Partition of copies by how their template edge ``e`` sits in the layout.

    Returns (pairs, singles): glued copy pairs and boundary singletons,
    0-based copy indices.
    """
    pairs, singles = [], []
    seen = set()
    for i in sorted(layout.copies):
        if i in seen:
            continue
        partner = layout.glued_partner(i, e)
        if partner is None:
            singles.append(i - 1)
        else:
            j, f = partner
            if f != e:
                raise InvalidArgument("gluing must identify equal template edge labels")
            pairs.append((i - 1, j - 1))
            seen.add(j)
        seen.add(i)
    return pairs, singles


def _row_patterns(n: int, nnz: int):
    pats = []
    for cols in combinations(range(n), nnz):
        for signbits in range(1 << nnz):
            row = np.zeros(n, dtype=np.int64)
            for b, c in enumerate(cols):
                row[c] = -1 if (signbits >> (nnz - 1 - b)) & 1 else 1
            pats.append(row)
    # deterministic lexicographic order over the full sign vectors
    pats.sort(key=lambda r: tuple(r))
    return pats


def find_transplantation_matrix(
    layout1: CopyLayout,
    layout2: CopyLayout,
    kind: str = "dirichlet",
    nnz_per_row: int = 3,
    max_solutions: int = 1,
) -> TransplantationMatrix:
    """Exhaustive search for a sign matrix mapping functions on layout1 to
    layout2 compatibly with the gluing structure.

    A row per layout2 copy selects ``nnz_per_row`` source copies with signs.
    Constraints, per template edge:

    * forward: the combined trace agrees across layout2 gluings and, for
      kind="dirichlet", vanishes on layout2 boundary edges;
    * reverse: the transposed matrix satisfies the mirror-image conditions
      from layout2 back onto layout1.

    The two-sided conditions plus invertibility are exactly what make the
    lifted nodal operator intertwine the discrete eigenproblems.

    Returns the lexicographically first solution (or a list when
    ``max_solutions`` > 1); raises TransplantationNotFound if the search
    space is exhausted.
    """
    if kind not in ("dirichlet", "neumann"):
        raise InvalidArgument(f"unknown kind {kind!r}")
    n = layout1.n_copies
    if layout2.n_copies != n:
        raise InvalidArgument("layouts must have equally many copies")

    classes1 = {e: _edge_classes(layout1, e) for e in range(3)}
    classes2 = {e: _edge_classes(layout2, e) for e in range(3)}
    structure2 = {}  # (i, e) -> partner copy (0-based) or None
    for i in sorted(layout2.copies):
        for e in range(3):
            p = layout2.glued_partner(i, e)
            structure2[(i - 1, e)] = None if p is None else p[0] - 1

    patterns = _row_patterns(n, nnz_per_row)

    def row_ok(i, row, rows):
        for e in range(3):
            pairs1, singles1 = classes1[e]
            pairs2, singles2 = classes2[e]
            partner = structure2[(i, e)]
            if partner is None:
                if kind == "dirichlet" and any(
                    row[k] + row[kk] != 0 for k, kk in pairs1
                ):
                    return False
                # Neumann: no forward condition on outer boundary edges
            elif partner < len(rows):
                other = rows[partner]
                if any(
                    row[k] + row[kk] != other[k] + other[kk] for k, kk in pairs1
                ):
                    return False
                if kind == "neumann" and any(row[k] != other[k] for k in singles1):
                    return False
            for a, b in pairs2:
                if max(a, b) != i:
                    continue
                u = row if a == i else rows[a]
                v = row if b == i else rows[b]
                if any(u[k] + v[k] != u[kk] + v[kk] for k, kk in pairs1):
                    return False
                if kind == "dirichlet" and any(u[k] + v[k] != 0 for k in singles1):
                    return False
            if kind == "neumann" and i in singles2:
                if any(row[k] != row[kk] for k, kk in pairs1):
                    return False
        return True

    solutions = []
    col_count = np.zeros(n, dtype=np.int64)

    def dfs(rows):
        nonlocal col_count
        if len(solutions) >= max_solutions:
            return
        i = len(rows)
        if i == n:
            t = np.array(rows, dtype=np.int64)
            if np.all(col_count == nnz_per_row) and abs(
                round(np.linalg.det(t.astype(float)))
            ) >= 0.5:
                solutions.append(t)
            return
        for row in patterns:
            if np.any(col_count + np.abs(row) > nnz_per_row):
                continue
            if not row_ok(i, row, rows):
                continue
            col_count += np.abs(row)
            dfs(rows + [row])
            col_count -= np.abs(row)
            if len(solutions) >= max_solutions:
                return

    dfs([])
    if not solutions:
        raise TransplantationNotFound(
            f"no {nnz_per_row}-sparse {kind} transplantation for this layout pair"
        )
    found = [TransplantationMatrix(t, nnz_per_row) for t in solutions]
    return found[0] if max_solutions == 1 else found


# Frozen search results for the seven-copy propeller pair built from
# PROPELLER_TREE_1 / PROPELLER_TREE_2 (see scripts/derive_propeller.py,
# which re-runs the exhaustive derivation and reproduces these tables).
PROPELLER_T_DIRICHLET = np.array(
    [
        [0, -1, -1, -1, 0, 0, 0],
        [-1, 0, 1, 0, 0, 0, -1],
        [-1, 0, 0, 1, -1, 0, 0],
        [-1, 1, 0, 0, 0, -1, 0],
        [0, 0, 0, -1, 0, 1, 1],
        [0, -1, 0, 0, 1, 0, 1],
        [0, 0, -1, 0, 1, 1, 0],
    ],
    dtype=np.int64,
)

PROPELLER_T_NEUMANN = np.array(
    [
        [0, -1, -1, -1, 0, 0, 0],
        [-1, 0, -1, 0, 0, 0, -1],
        [-1, 0, 0, -1, -1, 0, 0],
        [-1, -1, 0, 0, 0, -1, 0],
        [0, 0, 0, -1, 0, -1, -1],
        [0, -1, 0, 0, -1, 0, -1],
        [0, 0, -1, 0, -1, -1, 0],
    ],
    dtype=np.int64,
)


def lift_transplantation(
    tmat: TransplantationMatrix,
    nc1,
    nc2,
    mesh1,
    mesh2,
    kind: str = "dirichlet",
) -> OperatorMatrix:
    """Nodal operator realizing a transplantation on matched layout meshes.

    The value at a layout2 vertex owned by copy i and template vertex v is
    (1/sqrt(nnz)) * sum_k t[i,k] * f(vertex of copy k at v).  Vertices merged
    by gluing receive the same row from every owner; a mismatch raises
    TransplantationInconsistent.  For kind="dirichlet" the operator is
    restricted to interior vertices on both sides (boundary rows vanish
    identically and are checked to do so).
    """
    if nc1.template_mesh.n_vertices != nc2.template_mesh.n_vertices:
        raise MeshMismatch("correspondences come from different template meshes")
    t = tmat.t
    n = t.shape[0]
    nt = nc1.template_mesh.n_vertices
    scale = tmat.normalization

    # Dirichlet functions vanish at boundary vertices, so row agreement at
    # merged vertices is only meaningful (and only guaranteed) on interior
    # source columns; those are also the only columns that survive the
    # restriction below.
    keep = np.ones(mesh1.n_vertices, dtype=bool)
    if kind == "dirichlet":
        keep[:] = False
        keep[mesh1.interior_vertex_ids()] = True

    rows_by_vertex = {}
    for i in sorted(nc2.maps):
        ids2 = nc2.maps[i]
        for v in range(nt):
            entries = {}
            for k in range(n):
                if t[i - 1, k] == 0:
                    continue
                col = int(nc1.maps[k + 1][v])
                if not keep[col]:
                    continue
                entries[col] = entries.get(col, 0) + int(t[i - 1, k])
            entries = {c: w for c, w in entries.items() if w != 0}
            y = int(ids2[v])
            if y in rows_by_vertex:
                if rows_by_vertex[y] != entries:
                    raise TransplantationInconsistent(
                        f"conflicting rows at merged vertex {y}"
                    )
            else:
                rows_by_vertex[y] = entries

    data, ri, ci = [], [], []
    for y, entries in rows_by_vertex.items():
        for c, w in entries.items():
            ri.append(y)
            ci.append(c)
            data.append(scale * w)
    full = sp.coo_matrix(
        (data, (ri, ci)), shape=(mesh2.n_vertices, mesh1.n_vertices)
    ).tocsr()

    if kind == "dirichlet":
        int1 = mesh1.interior_vertex_ids()
        int2 = mesh2.interior_vertex_ids()
        bnd2 = mesh2.boundary_vertex_ids()
        leak = abs(full[bnd2][:, int1]).max() if len(bnd2) else 0.0
        if leak > 1e-12:
            raise TransplantationInconsistent(
                f"boundary rows do not vanish (max {leak:.2e})"
            )
        red = full[int2][:, int1].tocsr()
        return OperatorMatrix(red, int2, int1, "transplantation", {"kind": kind})
    all1 = np.arange(mesh1.n_vertices)
    all2 = np.arange(mesh2.n_vertices)
    return OperatorMatrix(full, all2, all1, "transplantation", {"kind": kind})


def spectral_intertwiner(s1, s2, L1, L2) -> OperatorMatrix:
    """Eigenbasis-matching operator U = Phi2 Phi1^T M1.

    Maps the k-th eigenvector of (A1, M1) to the k-th eigenvector of
    (A2, M2); defined on the converged eigen-subspace only, rank recorded.
    """
    if len(s1) != len(s2):
        raise InvalidArgument("spectra must have equal converged counts")
    lam1, lam2 = s1.eigenvalues, s2.eigenvalues
    mism = np.max(np.abs(lam1 - lam2) / np.maximum(np.abs(lam1), 1.0))
    u = s2.eigenvectors @ (s1.eigenvectors.T @ L1.mass.toarray())
    meta = {
        "kind": L1.kind,
        "rank": len(s1),
        "eigenvalue_mismatch": float(mism),
    }
    return OperatorMatrix(u, L2.dof_vertices, L1.dof_vertices, "spectral", meta)


def reflection_operator_1d(kind: str, m1, m2) -> OperatorMatrix:
    """Extension from (0, pi) to (0, 2 pi) by reflection in x = pi.

    kind="odd": f(x) on (0, pi], -f(2 pi - x) on (pi, 2 pi); kind="even"
    flips the sign.  Operates on full vertex spaces; restrict with
    restrict_operator for eigen comparisons.
    """
    if kind not in ("odd", "even"):
        raise InvalidArgument(f"unknown kind {kind!r}")
    if m1.dim != 1 or m2.dim != 1:
        raise MeshMismatch("reflection operator is one-dimensional")
    x1 = m1.vertices[:, 0]
    x2 = m2.vertices[:, 0]
    mid = 0.5 * (x2.min() + x2.max())
    tol = 1e-9
    ri, ci, data = [], [], []
    for y, xy in enumerate(x2):
        if xy <= mid + tol:
            src, sign = xy, 1.0
        else:
            src, sign = 2.0 * mid - xy, -1.0 if kind == "odd" else 1.0
        j = np.argmin(np.abs(x1 - src))
        if abs(x1[j] - src) > tol:
            raise MeshMismatch(f"no source vertex for x = {xy}")
        ri.append(y)
        ci.append(int(j))
        data.append(sign)
    u = sp.coo_matrix((data, (ri, ci)), shape=(len(x2), len(x1))).tocsr()
    return OperatorMatrix(
        u, np.arange(len(x2)), np.arange(len(x1)), f"reflection_{kind}", {"kind": kind}
    )


def multi_copy_operator(isometries, constants, m1, m2) -> OperatorMatrix:
    """Disjoint-copy operator (Uf)(y) = c_i f(tau_i(y)) on regions of m2.

    Each isometry must map its region of m2 vertices exactly onto m1
    vertices; a vertex image landing strictly inside the m1 domain but off
    every vertex raises MeshMismatch.  When regions share a vertex, the
    earliest isometry wins (half-open region convention).
    """
    if len(isometries) != len(constants):
        raise InvalidArgument("one constant per isometry required")
    from scipy.spatial import cKDTree

    tree = cKDTree(m1.vertices)
    tol = 1e-9
    n2, n1 = m2.n_vertices, m1.n_vertices
    assigned = np.full(n2, -1, dtype=np.int64)
    ri, ci, data = [], [], []
    for idx, (iso, c) in enumerate(zip(isometries, constants)):
        if m2.dim == 1:
            a, b = iso
            img = a * m2.vertices + b
        else:
            img = iso.apply(m2.vertices)
        dist, j = tree.query(img)
        for y in range(n2):
            if assigned[y] >= 0:
                continue
            if dist[y] <= tol:
                assigned[y] = idx
                ri.append(y)
                ci.append(int(j[y]))
                data.append(float(c))
            elif _inside_domain(m1, img[y], tol):
                raise MeshMismatch(
                    f"isometry {idx} maps vertex {y} off the m1 vertex set"
                )
    u = sp.coo_matrix((data, (ri, ci)), shape=(n2, n1)).tocsr()
    return OperatorMatrix(
        u, np.arange(n2), np.arange(n1), "multi_copy", {"n_copies": len(isometries)}
    )


def _inside_domain(m, p, tol) -> bool:
    """Point-in-mesh test via barycentric coordinates (1D: interval check)."""
    if m.dim == 1:
        x = p[0]
        lo, hi = m.vertices[:, 0].min(), m.vertices[:, 0].max()
        return lo - tol < x < hi + tol
    verts = m.vertices[m.cells]
    d1 = verts[:, 1] - verts[:, 0]
    d2 = verts[:, 2] - verts[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    r = p - verts[:, 0]
    s = (r[:, 0] * d2[:, 1] - r[:, 1] * d2[:, 0]) / det
    t = (d1[:, 0] * r[:, 1] - d1[:, 1] * r[:, 0]) / det
    eps = 1e-9
    return bool(np.any((s >= -eps) & (t >= -eps) & (s + t <= 1 + eps)))


def restrict_operator(u: OperatorMatrix, L1, L2) -> OperatorMatrix:
    """Restrict a full-vertex operator to the dof spaces of two Laplacians."""
    rsel = L2.dof_map[u.row_vertices] >= 0
    csel = L1.dof_map[u.col_vertices] >= 0
    mat = u.matrix[np.nonzero(rsel)[0]][:, np.nonzero(csel)[0]]
    return OperatorMatrix(
        mat, u.row_vertices[rsel], u.col_vertices[csel], u.tag, dict(u.meta)
    )


def intertwining_residual(u: OperatorMatrix, L1, L2) -> float:
    """Relative Frobenius defect of A2 U - U A1 on the dof spaces."""
    a1, a2 = L1.stiffness, L2.stiffness
    m = u.matrix
    d = a2 @ m - m @ a1
    num = sp.linalg.norm(d) if sp.issparse(d) else np.linalg.norm(d)
    den = sp.linalg.norm(a1) if sp.issparse(a1) else np.linalg.norm(a1)
    return float(num / den)

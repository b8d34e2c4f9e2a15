"""Operator analysis: disjointness testing, the point-map factorization
Uf(y) = h(y) f(tau(y)), local-isometry checks, component decomposition, and
the modulus operator."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import (
    ComponentNotRigid,
    EmptySupport,
    InsufficientPoints,
    InvalidArgument,
    NotDisjointnessPreserving,
)
from .geometry import Isometry, fit_isometry
from .mesh import Mesh
from .transplant import OperatorMatrix

PRESERVING_MAX = 1e-8
VIOLATING_MIN = 1e-3


@dataclass(frozen=True)
class Isometry1D:
    """Line isometry x -> a x + b with a = +-1."""

    a: float
    b: float

    def apply(self, x):
        return self.a * np.asarray(x) + self.b


@dataclass
class DisjointnessReport:
    trials: int
    max_overlap: float
    verdict: str
    witness: dict | None
    structural_ok: bool
    zero_operator: bool = False

    def to_json(self):
        w = None
        if self.witness is not None:
            w = {k: [int(i) for i in v] for k, v in self.witness.items()}
        return {
            "trials": self.trials,
            "max_overlap": self.max_overlap,
            "verdict": self.verdict,
            "witness": w,
            "structural_ok": self.structural_ok,
            "zero_operator": self.zero_operator,
        }


def _boundary_distance(m: Mesh, pts: np.ndarray) -> np.ndarray:
    """Distance from each point to the mesh boundary."""
    pts = np.atleast_2d(pts)
    if m.dim == 1:
        b = m.vertices[m.boundary_vertex_ids(), 0]
        return np.min(np.abs(pts[:, :1] - b[None, :]), axis=1)
    best = np.full(len(pts), np.inf)
    for (i, j), _ in m.boundary_facets:
        a = m.vertices[i]
        d = m.vertices[j] - a
        L2 = float(d @ d)
        t = np.clip(((pts - a) @ d) / L2, 0.0, 1.0)
        proj = a + t[:, None] * d
        best = np.minimum(best, np.linalg.norm(pts - proj, axis=1))
    return best


def _structural_row_check(U: OperatorMatrix, m1: Mesh) -> bool:
    """Every row's source vertices must fit inside one cell of m1."""
    mat = sp.csr_matrix(U.matrix)
    cell_sets = [frozenset(int(v) for v in c) for c in m1.cells]
    by_vertex = {}
    for ci, cs in enumerate(cell_sets):
        for v in cs:
            by_vertex.setdefault(v, []).append(ci)
    for r in range(mat.shape[0]):
        cols = mat.indices[mat.indptr[r] : mat.indptr[r + 1]]
        verts = {int(U.col_vertices[c]) for c in cols}
        if len(verts) <= 1:
            continue
        cands = None
        for v in verts:
            cs = set(by_vertex.get(v, []))
            cands = cs if cands is None else (cands & cs)
            if not cands:
                return False
    return True


def test_disjointness(
    U: OperatorMatrix, m1: Mesh, m2: Mesh, trials: int = 64, seed: int = 0
) -> DisjointnessReport:
    """Randomized probe for the disjointness-preserving property.

    Samples pairs of hat bumps with well-separated supports on m1 and
    measures the sup-norm overlap of their images.
    """
    if trials < 1:
        raise InvalidArgument("need at least one trial")
    mat = sp.csr_matrix(U.matrix)
    if mat.shape != (len(U.row_vertices), len(U.col_vertices)):
        raise InvalidArgument("operator index arrays do not match its shape")
    umax = abs(mat).max() if mat.nnz else 0.0
    if umax == 0.0:
        return DisjointnessReport(trials, 0.0, "preserving", None, True, True)

    pts = m1.vertices[U.col_vertices]
    h1 = m1.mesh_size()
    diam = float(np.max(np.ptp(pts, axis=0)))
    rng = np.random.default_rng(seed)
    eps = 1e-300
    worst = (0.0, None)
    done = 0
    attempts = 0
    while done < trials and attempts < 50 * trials:
        attempts += 1
        c1, c2 = rng.integers(0, len(pts), size=2)
        r1, r2 = rng.uniform(1.5 * h1, max(0.25 * diam, 2.0 * h1), size=2)
        sep = np.linalg.norm(pts[c1] - pts[c2])
        if sep <= r1 + r2 + 2.0 * h1:
            continue
        f = np.maximum(0.0, 1.0 - np.linalg.norm(pts - pts[c1], axis=1) / r1)
        g = np.maximum(0.0, 1.0 - np.linalg.norm(pts - pts[c2], axis=1) / r2)
        uf, ug = mat @ f, mat @ g
        num = float(np.max(np.abs(uf * ug)))
        den = float(np.max(np.abs(uf)) * np.max(np.abs(ug)) + eps)
        ov = num / den
        if ov > worst[0]:
            worst = (
                ov,
                {
                    "f_support": np.nonzero(f > 0)[0],
                    "g_support": np.nonzero(g > 0)[0],
                },
            )
        done += 1
    structural = _structural_row_check(U, m1)
    ov = worst[0]
    if ov <= PRESERVING_MAX:
        verdict = "preserving"
    elif ov > VIOLATING_MIN:
        verdict = "violating"
    else:
        verdict = "inconclusive"
    witness = worst[1] if verdict == "violating" else None
    return DisjointnessReport(done, ov, verdict, witness, structural)


@dataclass
class FactoredOperator:
    """Recovered weight h and point map tau of a preserving operator.

    Arrays are indexed by operator row; ``row_vertices`` maps rows back to
    m2 vertices.
    """

    support_mask: np.ndarray
    h: np.ndarray
    tau: np.ndarray
    boundary_hits: np.ndarray
    row_vertices: np.ndarray
    eps_h: float
    meta: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "support": self.support_mask.astype(int).tolist(),
            "h": self.h.tolist(),
            "tau": self.tau.tolist(),
            "boundary_hits": [int(i) for i in self.boundary_hits],
            "eps_h": self.eps_h,
        }


def factor_operator(
    U: OperatorMatrix, m1: Mesh, m2: Mesh, report: DisjointnessReport | None = None
) -> FactoredOperator:
    """Recover h := U(1) and tau_j := U(x_j) / h on the support.

    For operators tagged kind="dirichlet" a plateau function (1 at vertices
    farther than two mesh sizes from the boundary, 0 nearer) replaces the
    constant 1; the near-boundary ring is recorded via boundary_hits.
    """
    if report is None:
        report = test_disjointness(U, m1, m2)
    if report.verdict != "preserving":
        raise NotDisjointnessPreserving(
            f"verdict {report.verdict} (max overlap {report.max_overlap:.2e})",
            report=report,
        )
    mat = sp.csr_matrix(U.matrix)
    umax = abs(mat).max() if mat.nnz else 0.0
    eps_h = 1e-10 * umax if umax else 1e-10
    src_pts = m1.vertices[U.col_vertices]
    if U.meta.get("kind") == "dirichlet":
        mask = (_boundary_distance(m1, src_pts) > 2.0 * m1.mesh_size()).astype(float)
    else:
        mask = np.ones(len(src_pts))
    h = mat @ mask
    support = np.abs(h) > eps_h
    tau = np.zeros((mat.shape[0], m1.dim))
    for j in range(m1.dim):
        uxj = mat @ (mask * src_pts[:, j])
        tau[support, j] = uxj[support] / h[support]
    dist = np.full(mat.shape[0], np.inf)
    dist[support] = _boundary_distance(m1, tau[support])
    hits = np.nonzero(support & (dist <= m1.mesh_size()))[0]
    meta = {"kind": U.meta.get("kind"), "tag": U.tag}
    return FactoredOperator(support, h, tau, hits, np.asarray(U.row_vertices), eps_h, meta)


def _cell_gradients(m2: Mesh, values: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """P1 gradient of a nodal field on the given cells."""
    p = m2.vertices[cells]
    v = values[cells]
    if m2.dim == 1:
        return ((v[:, 1] - v[:, 0]) / (p[:, 1, 0] - p[:, 0, 0]))[:, None]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    f1 = v[:, 1] - v[:, 0]
    f2 = v[:, 2] - v[:, 0]
    gx = (f1 * d2[:, 1] - f2 * d1[:, 1]) / det
    gy = (f2 * d1[:, 0] - f1 * d2[:, 0]) / det
    return np.column_stack([gx, gy])


def _support_cells(fo: FactoredOperator, m2: Mesh):
    """Cells of m2 whose vertices all carry supported rows, with local ids.

    Cells straddling an h jump (component interface) are dropped.
    """
    row_of = np.full(m2.n_vertices, -1, dtype=np.int64)
    row_of[fo.row_vertices] = np.arange(len(fo.row_vertices))
    local = row_of[m2.cells]
    ok = np.all(local >= 0, axis=1)
    ok &= np.all(fo.support_mask[np.clip(local, 0, None)], axis=1) & ok
    hvals = fo.h[np.clip(local, 0, None)]
    jump = np.ptp(hvals, axis=1) > 10.0 * fo.eps_h
    keep = ok & ~jump
    return local[keep], m2.cells[keep]


def verify_local_isometry(fo: FactoredOperator, m2: Mesh) -> dict:
    """Check the gradient Gram identities of tau and constancy of h.

    Works cell-wise on cells interior to the support; interface cells are
    excluded.  Returns max deviations and the per-cell tables.
    """
    if not np.any(fo.support_mask):
        raise EmptySupport("factored operator has empty support")
    local, cells = _support_cells(fo, m2)
    if len(cells) == 0:
        raise EmptySupport("no cells fully inside the support")
    d = m2.dim
    nvert = m2.n_vertices
    hfull = np.zeros(nvert)
    hfull[fo.row_vertices] = fo.h
    taufull = np.zeros((nvert, d))
    taufull[fo.row_vertices] = fo.tau

    grads = [_cell_gradients(m2, taufull[:, j], cells) for j in range(d)]
    gram_dev = np.zeros(len(cells))
    for j in range(d):
        for k in range(j, d):
            dot = np.sum(grads[j] * grads[k], axis=1)
            dev = np.abs(dot - (1.0 if j == k else 0.0))
            gram_dev = np.maximum(gram_dev, dev)
    gh = np.linalg.norm(_cell_gradients(m2, hfull, cells), axis=1)
    return {
        "max_gram_dev": float(np.max(gram_dev)),
        "max_grad_h": float(np.max(gh)),
        "per_cell_gram": gram_dev,
        "per_cell_grad_h": gh,
        "n_cells": int(len(cells)),
    }


@dataclass
class Component:
    rows: np.ndarray
    vertices: np.ndarray
    iso: object
    constant: float
    fit_rms: float
    area: float = 0.0

    def to_json(self):
        if isinstance(self.iso, Isometry1D):
            iso = {"a": self.iso.a, "b": self.iso.b}
        else:
            iso = {"q": self.iso.q.tolist(), "t": self.iso.t.tolist()}
        return {
            "vertices": [int(v) for v in self.vertices],
            "iso": iso,
            "constant": self.constant,
            "fit_rms": self.fit_rms,
            "area": self.area,
        }


@dataclass
class ComponentDecomposition:
    components: list
    residual_vertices: np.ndarray

    @property
    def n_components(self) -> int:
        return len(self.components)

    def constants(self) -> np.ndarray:
        return np.array([c.constant for c in self.components])

    def to_json(self):
        return {
            "components": [c.to_json() for c in self.components],
            "residual_vertices": [int(v) for v in self.residual_vertices],
        }


def _fit_1d(x: np.ndarray, y: np.ndarray) -> tuple[Isometry1D, float]:
    best = None
    for a in (1.0, -1.0):
        b = float(np.mean(y - a * x))
        rms = float(np.sqrt(np.mean((a * x + b - y) ** 2)))
        if best is None or rms < best[1]:
            best = (Isometry1D(a, b), rms)
    return best


def decompose_components(fo: FactoredOperator, m2: Mesh) -> ComponentDecomposition:
    """Split the support into maximal patches of constant h and rigid tau.

    Flood fill over cells: a cell joins vertices only if tau preserves its
    pairwise distances and h has no jump; adjacent cells connect only if
    their combined vertex set is still mapped rigidly (this catches folds,
    where every single cell is isometric but neighbours reverse direction).
    Each component gets a fitted rigid motion and the median of h as its
    constant.
    """
    support_rows = np.nonzero(fo.support_mask)[0]
    if len(support_rows) == 0:
        raise EmptySupport("factored operator has empty support")
    row_of = np.full(m2.n_vertices, -1, dtype=np.int64)
    row_of[fo.row_vertices] = np.arange(len(fo.row_vertices))

    parent = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(int(a)), find(int(b))
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    hjump = 10.0 * fo.eps_h

    def rigid_rows(rows):
        """True if h is level and tau preserves all pairwise distances."""
        if np.ptp(fo.h[rows]) > hjump:
            return False
        src = m2.vertices[fo.row_vertices[rows]]
        dst = fo.tau[rows]
        for a in range(len(rows)):
            for b in range(a + 1, len(rows)):
                d_src = np.linalg.norm(src[a] - src[b])
                d_img = np.linalg.norm(dst[a] - dst[b])
                if not (0.5 * d_src <= d_img <= 1.5 * d_src + hjump):
                    return False
        return True

    # union-find over rigid cells; a vertex shared by two folds would merge
    # everything if the union ran over vertices directly
    cell_rows = []
    for ci, cell in enumerate(m2.cells):
        rows = row_of[cell]
        if (rows < 0).any() or not fo.support_mask[rows].all() or not rigid_rows(rows):
            cell_rows.append(None)
            continue
        cell_rows.append(rows)
        parent[ci] = ci

    # adjacency: shared facet in 2D, shared vertex in 1D
    facet_cells = {}
    for ci, cell in enumerate(m2.cells):
        if cell_rows[ci] is None:
            continue
        if m2.dim == 1:
            facets = [(int(cell[0]),), (int(cell[1]),)]
        else:
            facets = [
                tuple(sorted((int(cell[a]), int(cell[b]))))
                for a, b in ((0, 1), (1, 2), (2, 0))
            ]
        for f in facets:
            facet_cells.setdefault(f, []).append(ci)
    for cells in facet_cells.values():
        for i in range(len(cells)):
            for j in range(i + 1, len(cells)):
                ra, rb = cell_rows[cells[i]], cell_rows[cells[j]]
                both = np.unique(np.concatenate([ra, rb]))
                if rigid_rows(both):
                    union(cells[i], cells[j])

    groups = {}
    claimed = np.zeros(len(fo.row_vertices), dtype=bool)
    for ci in sorted(parent):
        rows = [int(r) for r in cell_rows[ci] if not claimed[r]]
        claimed[cell_rows[ci]] = True
        groups.setdefault(find(ci), []).extend(rows)
    groups = {k: v for k, v in groups.items() if v}
    # supported rows touched by no rigid cell stay as singleton patches
    for r in support_rows:
        if not claimed[r]:
            groups[("lone", int(r))] = [int(r)]

    hmax = m2.mesh_size()
    comps = []
    for rows in groups.values():
        rows = np.array(sorted(rows))
        verts = fo.row_vertices[rows]
        src = m2.vertices[verts]
        dst = fo.tau[rows]
        if m2.dim == 1:
            iso, rms = _fit_1d(src[:, 0], dst[:, 0])
        else:
            try:
                iso, rms = fit_isometry(src, dst)
            except InsufficientPoints:
                t = np.mean(dst - src, axis=0)
                iso = Isometry(np.eye(2), t)
                rms = float(np.sqrt(np.mean(np.sum((src + t - dst) ** 2, axis=1))))
        if rms > 10.0 * hmax:
            raise ComponentNotRigid(f"component of {len(rows)} vertices, rms {rms:.2e}")
        inset = np.zeros(m2.n_vertices, dtype=bool)
        inset[verts] = True
        covered = np.all(inset[m2.cells], axis=1)
        area = float(np.sum(np.abs(m2.cell_measures()[covered])))
        comps.append(Component(rows, verts, iso, float(np.median(fo.h[rows])), rms, area))
    comps.sort(key=lambda c: (-len(c.rows), int(c.vertices[0])))
    outside = fo.row_vertices[~fo.support_mask]
    return ComponentDecomposition(comps, np.asarray(outside))


def modulus_operator(
    U: OperatorMatrix, m1: Mesh | None = None, m2: Mesh | None = None,
    report: DisjointnessReport | None = None,
) -> OperatorMatrix:
    """Entrywise absolute value; valid for disjointness-preserving operators."""
    if report is None and m1 is not None and m2 is not None:
        report = test_disjointness(U, m1, m2)
    if report is not None and report.verdict == "violating":
        raise NotDisjointnessPreserving("modulus of a non-preserving operator", report)
    mat = U.matrix
    out = abs(mat.tocsr()) if sp.issparse(mat) else np.abs(np.asarray(mat))
    return OperatorMatrix(
        out, np.asarray(U.row_vertices), np.asarray(U.col_vertices),
        f"modulus({U.tag})", dict(U.meta),
    )


def dense_range_check(U: OperatorMatrix, tol: float = 1e-10) -> dict:
    """Numerical surjectivity via singular values."""
    dense = U.dense()
    if min(dense.shape) == 0:
        return {"dense": False, "rank_deficiency": dense.shape[0]}
    s = np.linalg.svd(dense, compute_uv=False)
    rank = int(np.sum(s > tol * s[0])) if s[0] > 0 else 0
    return {"dense": rank == dense.shape[0], "rank_deficiency": int(dense.shape[0] - rank)}

"""Element assembly kernels.

Two implementations of each kernel: a jitted loop (numba) and a vectorized
numpy fallback.  Set DRUMKIT_NO_NUMBA=1 to force the fallback; the active
flavor is reported in ``BACKEND``.
"""

import os

import numpy as np

_disable = os.environ.get("DRUMKIT_NO_NUMBA", "").lower() in ("1", "true", "yes")
if not _disable:
    try:
        from numba import njit

        BACKEND = "numba"
    except ImportError:
        _disable = True
if _disable:
    BACKEND = "numpy"

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def _tri_geometry(verts, cells):
    p = verts[cells]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    area2 = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    return p, area2


def stiffness_triplets_numpy(verts, cells):
    p, area2 = _tri_geometry(verts, cells)
    # gradient of basis k is the rotated opposite edge over twice the area
    g = np.empty((len(cells), 3, 2))
    for k in range(3):
        e = p[:, (k + 2) % 3] - p[:, (k + 1) % 3]
        g[:, k, 0] = -e[:, 1]
        g[:, k, 1] = e[:, 0]
    g /= area2[:, None, None]
    local = 0.5 * np.abs(area2)[:, None, None] * np.einsum("cid,cjd->cij", g, g)
    rows = np.repeat(cells, 3, axis=1).reshape(-1)
    cols = np.tile(cells, (1, 3)).reshape(-1)
    return rows, cols, local.transpose(0, 2, 1).reshape(-1)


def mass_triplets_numpy(verts, cells):
    _, area2 = _tri_geometry(verts, cells)
    base = (np.ones((3, 3)) + np.eye(3)) / 24.0
    local = np.abs(area2)[:, None, None] * base
    rows = np.repeat(cells, 3, axis=1).reshape(-1)
    cols = np.tile(cells, (1, 3)).reshape(-1)
    return rows, cols, local.transpose(0, 2, 1).reshape(-1)


def segment_stiffness_triplets_numpy(verts, cells):
    h = np.abs(verts[cells[:, 1], 0] - verts[cells[:, 0], 0])
    base = np.array([[1.0, -1.0], [-1.0, 1.0]])
    local = base[None] / h[:, None, None]
    rows = np.repeat(cells, 2, axis=1).reshape(-1)
    cols = np.tile(cells, (1, 2)).reshape(-1)
    return rows, cols, local.transpose(0, 2, 1).reshape(-1)


def segment_mass_triplets_numpy(verts, cells):
    h = np.abs(verts[cells[:, 1], 0] - verts[cells[:, 0], 0])
    base = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    local = base[None] * h[:, None, None]
    rows = np.repeat(cells, 2, axis=1).reshape(-1)
    cols = np.tile(cells, (1, 2)).reshape(-1)
    return rows, cols, local.transpose(0, 2, 1).reshape(-1)


def edge_mass_triplets_numpy(verts, edges, beta):
    """Boundary mass for 2D meshes; beta sampled at edge endpoints (linear)."""
    length = np.linalg.norm(verts[edges[:, 1]] - verts[edges[:, 0]], axis=1)
    bi, bj = beta[:, 0], beta[:, 1]
    loc = np.empty((len(edges), 2, 2))
    loc[:, 0, 0] = 3.0 * bi + bj
    loc[:, 0, 1] = bi + bj
    loc[:, 1, 0] = bi + bj
    loc[:, 1, 1] = bi + 3.0 * bj
    loc *= (length / 12.0)[:, None, None]
    rows = np.repeat(edges, 2, axis=1).reshape(-1)
    cols = np.tile(edges, (1, 2)).reshape(-1)
    return rows, cols, loc.transpose(0, 2, 1).reshape(-1)


@njit(cache=True)
def _stiffness_loop(verts, cells, rows, cols, vals):
    for c in range(cells.shape[0]):
        i0, i1, i2 = cells[c, 0], cells[c, 1], cells[c, 2]
        x0, y0 = verts[i0, 0], verts[i0, 1]
        x1, y1 = verts[i1, 0], verts[i1, 1]
        x2, y2 = verts[i2, 0], verts[i2, 1]
        a2 = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        gx0 = -(y2 - y1) / a2
        gy0 = (x2 - x1) / a2
        gx1 = -(y0 - y2) / a2
        gy1 = (x0 - x2) / a2
        gx2 = -(y1 - y0) / a2
        gy2 = (x1 - x0) / a2
        area = 0.5 * abs(a2)
        gx = (gx0, gx1, gx2)
        gy = (gy0, gy1, gy2)
        idx = (i0, i1, i2)
        k = 9 * c
        for a in range(3):
            for b in range(3):
                rows[k] = idx[a]
                cols[k] = idx[b]
                vals[k] = area * (gx[a] * gx[b] + gy[a] * gy[b])
                k += 1


@njit(cache=True)
def _mass_loop(verts, cells, rows, cols, vals):
    for c in range(cells.shape[0]):
        i0, i1, i2 = cells[c, 0], cells[c, 1], cells[c, 2]
        x0, y0 = verts[i0, 0], verts[i0, 1]
        x1, y1 = verts[i1, 0], verts[i1, 1]
        x2, y2 = verts[i2, 0], verts[i2, 1]
        a2 = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        area = 0.5 * abs(a2)
        idx = (i0, i1, i2)
        k = 9 * c
        for a in range(3):
            for b in range(3):
                rows[k] = idx[a]
                cols[k] = idx[b]
                vals[k] = area / 12.0 * (2.0 if a == b else 1.0)
                k += 1


def stiffness_triplets_numba(verts, cells):
    n = 9 * len(cells)
    rows = np.empty(n, dtype=np.int64)
    cols = np.empty(n, dtype=np.int64)
    vals = np.empty(n)
    _stiffness_loop(verts, cells, rows, cols, vals)
    return rows, cols, vals


def mass_triplets_numba(verts, cells):
    n = 9 * len(cells)
    rows = np.empty(n, dtype=np.int64)
    cols = np.empty(n, dtype=np.int64)
    vals = np.empty(n)
    _mass_loop(verts, cells, rows, cols, vals)
    return rows, cols, vals


if BACKEND == "numba":
    stiffness_triplets = stiffness_triplets_numba
    mass_triplets = mass_triplets_numba
else:
    stiffness_triplets = stiffness_triplets_numpy
    mass_triplets = mass_triplets_numpy

segment_stiffness_triplets = segment_stiffness_triplets_numpy
segment_mass_triplets = segment_mass_triplets_numpy
edge_mass_triplets = edge_mass_triplets_numpy

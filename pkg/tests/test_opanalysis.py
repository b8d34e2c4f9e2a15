import numpy as np
import pytest
import scipy.sparse as sp

from drumkit.errors import ComponentNotRigid, EmptySupport, NotDisjointnessPreserving
from drumkit.eigen import solve_eigs
from drumkit.fem import build_laplacian
from drumkit.geometry import Isometry
from drumkit.mesh import mesh_interval, mesh_rectangle
from drumkit.opanalysis import (
    Isometry1D,
    decompose_components,
    dense_range_check,
    factor_operator,
    modulus_operator,
    test_disjointness as probe_disjointness,
    verify_local_isometry,
)
from drumkit.transplant import (
    OperatorMatrix,
    multi_copy_operator,
    reflection_operator_1d,
    spectral_intertwiner,
)


def _squares(n=8):
    m1 = mesh_rectangle((0.0, 0.0), (1.0, 1.0), n, n)
    m2 = mesh_rectangle((0.0, 0.0), (1.0, 1.0), n, n)
    return m1, m2


def test_isometry_operator_preserves_disjointness():
    m1, m2 = _squares()
    u = multi_copy_operator([Isometry.rotation(np.pi / 2, (1.0, 0.0))], [1.0], m2, m2)
    rep = probe_disjointness(u, m2, m2, trials=32, seed=5)
    assert rep.verdict == "preserving"
    assert rep.max_overlap <= 1e-8
    assert rep.structural_ok


def test_averaging_operator_violates_disjointness():
    m1, m2 = _squares()
    n = m1.n_vertices
    dense = np.full((n, n), 1.0 / n)
    u = OperatorMatrix(sp.csr_matrix(dense), np.arange(n), np.arange(n), "avg")
    rep = probe_disjointness(u, m1, m2, trials=32, seed=6)
    assert rep.verdict == "violating"
    assert rep.max_overlap > 1e-3
    assert rep.witness is not None


def test_spectral_intertwiner_between_unrelated_shapes_violates():
    m1 = mesh_rectangle((0.0, 0.0), (1.0, 1.0), 8, 8)
    m2 = mesh_rectangle((0.0, 0.0), (2.0, 0.5), 16, 4)
    L1 = build_laplacian(m1, "neumann")
    L2 = build_laplacian(m2, "neumann")
    s1 = solve_eigs(L1, 12)
    s2 = solve_eigs(L2, 12)
    u = spectral_intertwiner(s1, s2, L1, L2)
    rep = probe_disjointness(u, m1, m2, trials=32, seed=7)
    assert rep.verdict == "violating"


def test_zero_operator_flagged():
    m1, m2 = _squares(4)
    n = m1.n_vertices
    u = OperatorMatrix(sp.csr_matrix((n, n)), np.arange(n), np.arange(n), "zero")
    rep = probe_disjointness(u, m1, m2, trials=4, seed=8)
    assert rep.zero_operator


def test_factor_identity_operator():
    m1, m2 = _squares()
    u = multi_copy_operator([Isometry.identity()], [3.0], m1, m2)
    fo = factor_operator(u, m1, m2)
    assert fo.support_mask.all()
    assert np.allclose(fo.h, 3.0)
    assert np.allclose(fo.tau, m2.vertices, atol=1e-12)
    assert set(m2.boundary_vertex_ids()) <= set(fo.boundary_hits)


def test_factor_refuses_violating_operator():
    m1, m2 = _squares(8)
    n = m1.n_vertices
    dense = np.full((n, n), 1.0 / n)
    u = OperatorMatrix(sp.csr_matrix(dense), np.arange(n), np.arange(n), "avg")
    with pytest.raises(NotDisjointnessPreserving):
        factor_operator(u, m1, m2)


def test_verify_local_isometry_exact_rotation():
    m1 = mesh_rectangle((0.0, 0.0), (1.0, 1.0), 8, 8)
    iso = Isometry.rotation(np.pi / 3, (0.2, -0.4))
    m2 = mesh_rectangle((0.0, 0.0), (1.0, 1.0), 8, 8)
    verts = iso.inverse().apply(m2.vertices)
    m2 = type(m2)(verts, m2.cells, m2.boundary_facets)
    u = multi_copy_operator([iso], [1.0], m1, m2)
    fo = factor_operator(u, m1, m2)
    res = verify_local_isometry(fo, m2)
    assert res["max_gram_dev"] < 1e-9
    assert res["max_grad_h"] < 1e-9


def test_verify_local_isometry_flags_scaling():
    # U pulls values from coordinates scaled by 1.1, so tau has gradient
    # 1.1 I and the Gram defect is exactly 0.21
    m1 = mesh_rectangle((0.0, 0.0), (1.1, 1.1), 8, 8)
    m2 = mesh_rectangle((0.0, 0.0), (1.0, 1.0), 8, 8)
    n = m1.n_vertices
    u = OperatorMatrix(sp.identity(n, format="csr"), np.arange(n), np.arange(n), "scale")
    fo = factor_operator(u, m1, m2)
    res = verify_local_isometry(fo, m2)
    assert abs(res["max_gram_dev"] - 0.21) < 1e-6


def test_empty_support_raises():
    m1, m2 = _squares(4)
    n = m1.n_vertices
    u = OperatorMatrix(sp.csr_matrix((n, n)), np.arange(n), np.arange(n), "zero")
    fo_args = probe_disjointness(u, m1, m2, trials=2, seed=9)
    with pytest.raises(EmptySupport):
        fo = factor_operator(u, m1, m2, fo_args)
        verify_local_isometry(fo, m2)


def test_decompose_single_component():
    m1, m2 = _squares()
    u = multi_copy_operator([Isometry.identity()], [1.0], m1, m2)
    dec = decompose_components(factor_operator(u, m1, m2), m2)
    assert dec.n_components == 1
    assert dec.components[0].fit_rms < 1e-12
    assert np.isclose(dec.components[0].area, 1.0)


def test_decompose_two_components_1d():
    m1 = mesh_interval(0.0, np.pi, 64)
    m2 = mesh_interval(0.0, 2 * np.pi, 128)
    u = reflection_operator_1d("odd", m1, m2)
    dec = decompose_components(factor_operator(u, m1, m2), m2)
    assert dec.n_components == 2
    consts = sorted(dec.constants())
    assert np.allclose(consts, [-1.0, 1.0], atol=1e-12)
    slopes = sorted(c.iso.a for c in dec.components)
    assert np.allclose(slopes, [-1.0, 1.0], atol=1e-12)


def test_decompose_three_components_with_constants():
    m1 = mesh_rectangle((0.0, 0.0), (1.0, 1.0), 6, 6)
    m2 = mesh_rectangle((0.0, 0.0), (3.0, 1.0), 18, 6)
    isos = [
        Isometry.identity(),
        Isometry.rotation(0.0, (-1.0, 0.0)),
        Isometry.rotation(0.0, (-2.0, 0.0)),
    ]
    u = multi_copy_operator(isos, [1.0, -2.0, 0.5], m1, m2)
    dec = decompose_components(factor_operator(u, m1, m2), m2)
    assert dec.n_components == 3
    assert sorted(np.round(dec.constants(), 12)) == [-2.0, 0.5, 1.0]
    for c in dec.components:
        assert c.fit_rms < 1e-12


def test_modulus_operator_entrywise():
    m1 = mesh_interval(0.0, np.pi, 32)
    m2 = mesh_interval(0.0, 2 * np.pi, 64)
    u = reflection_operator_1d("odd", m1, m2)
    au = modulus_operator(u)
    assert (au.matrix.data >= 0).all()
    assert abs(abs(u.matrix) - au.matrix).max() == 0


def test_dense_range_check():
    m1, m2 = _squares(4)
    n = m1.n_vertices
    full = OperatorMatrix(sp.identity(n, format="csr"), np.arange(n), np.arange(n), "id")
    assert dense_range_check(full)["dense"]
    rank1 = OperatorMatrix(
        sp.csr_matrix(np.outer(np.ones(n), np.ones(n))),
        np.arange(n), np.arange(n), "r1",
    )
    res = dense_range_check(rank1)
    assert not res["dense"]
    assert res["rank_deficiency"] == n - 1

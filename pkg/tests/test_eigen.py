import numpy as np
import pytest

from drumkit.errors import InsufficientData, InvalidArgument, RangeExceeded
from drumkit.eigen import (
    Spectrum,
    counting_function,
    heat_apply,
    solve_eigs,
    weyl_fit,
)
from drumkit.fem import build_laplacian
from drumkit.mesh import mesh_interval, mesh_rectangle, refine


def _square_laplacian(n, kind="dirichlet"):
    return build_laplacian(mesh_rectangle((0.0, 0.0), (1.0, 1.0), n, n), kind)


def _fake_spectrum(vals):
    vals = np.asarray(vals, dtype=float)
    return Spectrum(vals, np.zeros((1, len(vals))), np.zeros(len(vals)), len(vals))


def test_interval_eigenvalues_converge_to_squares():
    L = build_laplacian(mesh_interval(0.0, np.pi, 400), "dirichlet")
    s = solve_eigs(L, 5)
    for k in range(1, 6):
        assert abs(s.eigenvalues[k - 1] - k * k) < 2e-4 * k * k


def test_square_eigenvalues_converge_to_lattice():
    exact = np.pi**2 * np.array([2, 5, 5, 8, 10, 10])
    L = _square_laplacian(32)
    s = solve_eigs(L, 6)
    assert np.max(np.abs(s.eigenvalues - exact) / exact) < 1e-2


def test_residuals_and_m_orthonormality():
    L = _square_laplacian(12)
    s = solve_eigs(L, 8)
    assert np.max(s.residuals) < 1e-10
    g = s.eigenvectors.T @ (L.mass @ s.eigenvectors)
    assert np.max(np.abs(g - np.eye(8))) < 1e-10


def test_dense_and_sparse_paths_agree():
    L = build_laplacian(mesh_interval(0.0, 1.0, 2500), "dirichlet")
    assert L.n_dof > 2000  # forces the iterative path
    s_it = solve_eigs(L, 4, seed=3)
    Ld = build_laplacian(mesh_interval(0.0, 1.0, 1999), "dirichlet")
    s_d = solve_eigs(Ld, 4)
    assert np.allclose(s_it.eigenvalues, s_d.eigenvalues, rtol=1e-5)


def test_neumann_bottom_eigenvalue_is_zero():
    L = _square_laplacian(10, "neumann")
    s = solve_eigs(L, 3)
    assert abs(s.eigenvalues[0]) < 1e-9
    assert s.eigenvalues[1] > 1.0


def test_clusters_group_near_degenerate_pairs():
    s = _fake_spectrum([1.0, 2.0, 2.0 + 1e-9, 5.0])
    groups = s.clusters(rel_gap=1e-6)
    assert [len(g) for g in groups] == [1, 2, 1]


def test_spectrum_csv_roundtrip(tmp_path):
    L = _square_laplacian(8)
    s = solve_eigs(L, 5)
    p = tmp_path / "eigs.csv"
    s.save_csv(p)
    s2 = Spectrum.load_csv(p)
    assert np.allclose(s.eigenvalues, s2.eigenvalues)
    assert np.allclose(s.residuals, s2.residuals)


def test_heat_apply_decays_eigenmode():
    L = _square_laplacian(10)
    s = solve_eigs(L, 1)
    v = s.eigenvectors[:, 0]
    out, info = heat_apply(L, 0.05, v)
    assert info["method"] == "dense"
    assert np.allclose(out, np.exp(-0.05 * s.eigenvalues[0]) * v, atol=1e-10)


def test_heat_apply_rejects_negative_time():
    L = _square_laplacian(4)
    with pytest.raises(InvalidArgument):
        heat_apply(L, -1.0, np.zeros(L.n_dof))


def test_counting_function_and_range_guard():
    s = _fake_spectrum([1.0, 2.0, 3.0])
    assert counting_function(s, 2.5) == 2
    with pytest.raises(RangeExceeded):
        counting_function(s, 10.0)


def test_weyl_fit_exact_interval():
    s = _fake_spectrum([k * k for k in range(1, 101)])
    fit = weyl_fit(s)
    assert fit["d_est"] == 1
    assert abs(fit["vol_est"] - np.pi) < 1e-8


def test_weyl_fit_exact_square():
    vals = sorted(
        np.pi**2 * (a * a + b * b) for a in range(1, 40) for b in range(1, 40)
    )[:120]
    fit = weyl_fit(_fake_spectrum(vals))
    assert fit["d_est"] == 2
    assert abs(fit["vol_est"] - 1.0) < 0.1


def test_weyl_fit_needs_enough_eigenvalues():
    with pytest.raises(InsufficientData):
        weyl_fit(_fake_spectrum(np.arange(1.0, 20.0)))

import json

import numpy as np
import scipy.sparse as sp
from scipy.io import mmwrite

from drumkit.cli import main
from drumkit.eigen import solve_eigs
from drumkit.fem import build_laplacian
from drumkit.geometry import Isometry
from drumkit.mesh import mesh_rectangle
from drumkit.transplant import multi_copy_operator


def test_pair_writes_artifacts(tmp_path):
    rc = main(["pair", "--out", str(tmp_path)])
    assert rc == 0
    for name in ("layout1.json", "layout2.json", "transplant.json", "search.log"):
        assert (tmp_path / name).exists()
    doc = json.loads((tmp_path / "transplant.json").read_text())
    t = np.asarray(doc["dirichlet"])
    assert t.shape == (7, 7)
    assert (np.count_nonzero(t, axis=1) == 3).all()


def test_eig_is_deterministic(tmp_path):
    main(["pair", "--out", str(tmp_path)])
    layout = str(tmp_path / "layout1.json")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["eig", "--layout", layout, "--k", "4", "--levels", "2",
                 "--out", str(a)]) == 0
    assert main(["eig", "--layout", layout, "--k", "4", "--levels", "2",
                 "--out", str(b)]) == 0
    assert (a / "spectrum.csv").read_bytes() == (b / "spectrum.csv").read_bytes()
    header = (a / "spectrum.csv").read_text().splitlines()[0]
    assert header == "level,k,lambda,residual,order"


def test_eig_from_mesh_file(tmp_path):
    m = mesh_rectangle((0.0, 0.0), (1.0, 1.0), 4, 4)
    mf = tmp_path / "m.json"
    m.save(mf)
    rc = main(["eig", "--mesh", str(mf), "--kind", "neumann", "--k", "3",
               "--levels", "2", "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "spectrum.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 3


def test_analyze_congruent_exit_zero(tmp_path):
    m1 = mesh_rectangle((0.0, 0.0), (1.0, 1.0), 8, 8)
    m2 = mesh_rectangle((0.0, 0.0), (1.0, 1.0), 8, 8)
    u = multi_copy_operator([Isometry.identity()], [1.0], m1, m2)
    m1.save(tmp_path / "m1.json")
    m2.save(tmp_path / "m2.json")
    mmwrite(tmp_path / "u.mtx", u.matrix)
    rc = main(["analyze", "--operator", str(tmp_path / "u.mtx"),
               "--mesh1", str(tmp_path / "m1.json"),
               "--mesh2", str(tmp_path / "m2.json"),
               "--out", str(tmp_path)])
    assert rc == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["decision"]["congruent"]


def test_analyze_refuses_smoothing_operator(tmp_path):
    m1 = mesh_rectangle((0.0, 0.0), (1.0, 1.0), 8, 8)
    n = m1.n_vertices
    u = sp.csr_matrix(np.full((n, n), 1.0 / n))
    m1.save(tmp_path / "m1.json")
    mmwrite(tmp_path / "u.mtx", u)
    rc = main(["analyze", "--operator", str(tmp_path / "u.mtx"),
               "--mesh1", str(tmp_path / "m1.json"),
               "--mesh2", str(tmp_path / "m1.json"),
               "--out", str(tmp_path)])
    assert rc == 20
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["disjointness"]["verdict"] == "violating"


def test_analyze_shape_mismatch_exit_30(tmp_path):
    m1 = mesh_rectangle((0.0, 0.0), (1.0, 1.0), 4, 4)
    m2 = mesh_rectangle((0.0, 0.0), (1.0, 1.0), 5, 5)
    u = sp.identity(m1.n_vertices, format="csr")
    m1.save(tmp_path / "m1.json")
    m2.save(tmp_path / "m2.json")
    mmwrite(tmp_path / "u.mtx", u)
    rc = main(["analyze", "--operator", str(tmp_path / "u.mtx"),
               "--mesh1", str(tmp_path / "m1.json"),
               "--mesh2", str(tmp_path / "m2.json"),
               "--out", str(tmp_path)])
    assert rc == 30


def test_weyl_roundtrip_and_empty_input(tmp_path):
    m = mesh_rectangle((0.0, 0.0), (1.0, 1.0), 32, 32)
    s = solve_eigs(build_laplacian(m, "dirichlet"), 80)
    spec = tmp_path / "eigs.csv"
    s.save_csv(spec)
    rc = main(["weyl", "--spectrum", str(spec), "--out", str(tmp_path)])
    assert rc == 0
    fit = json.loads((tmp_path / "weyl_fit.json").read_text())
    assert fit["d_est"] == 2
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["weyl", "--spectrum", str(empty), "--out", str(tmp_path)]) == 30

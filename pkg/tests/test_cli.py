import json

import numpy as np
import pytest

from phipm import cli, linops
from phipm.oracle import exact_combination


def write_mm(path, a):
    linops.write_matrix_market(path, linops.SparseMatrix.from_dense(np.asarray(a, dtype=float)))
    return str(path)


def read_solution(path):
    return np.loadtxt(path, ndmin=1)


def test_eval_zero_matrix(tmp_path):
    mat = write_mm(tmp_path / "z.mtx", np.zeros((2, 2)))
    out = tmp_path / "u.txt"
    rc = cli.main(["eval", "--matrix", mat, "--ones", "1", "--t", "1", "--out", str(out)])
    assert rc == 0
    # phi_0(0) 1 + phi_1(0) 1 = 2
    np.testing.assert_allclose(read_solution(out), [2.0, 2.0], rtol=1e-14)


def test_eval_matches_oracle(tmp_path):
    mm = tmp_path / "l.mtx"
    assert cli.main(["gen", "laplacian1d", "--n", "50", "--negate", "--out", str(mm)]) == 0
    out, stats = tmp_path / "u.txt", tmp_path / "s.json"
    rc = cli.main(["eval", "--matrix", str(mm), "--ones", "0", "--t", "0.1",
                   "--tol", "1e-8", "--out", str(out), "--stats", str(stats)])
    assert rc == 0
    a = linops.read_matrix_market(mm).toarray()
    ref = exact_combination(a, np.ones((50, 1)), 0.1)
    assert np.linalg.norm(read_solution(out) - ref) / np.linalg.norm(ref) <= 1e-6
    data = json.loads(stats.read_text())
    assert list(data) == ["steps", "rejections", "matvecs", "exponentials"]
    assert data["steps"] >= 1 and data["matvecs"] > 0


def test_eval_b_file(tmp_path, rng):
    a = rng.standard_normal((6, 6)) * 0.3
    B = rng.standard_normal((6, 3))
    mat = write_mm(tmp_path / "a.mtx", a)
    bpath = tmp_path / "b.txt"
    np.savetxt(bpath, B)
    out = tmp_path / "u.txt"
    assert cli.main(["eval", "--matrix", mat, "--b", str(bpath), "--tol", "1e-12",
                     "--out", str(out)]) == 0
    np.testing.assert_allclose(read_solution(out), exact_combination(a, B), rtol=1e-9, atol=1e-10)


def test_eval_stdout(tmp_path, capsys):
    mat = write_mm(tmp_path / "z.mtx", np.zeros((3, 3)))
    assert cli.main(["eval", "--matrix", mat, "--ones", "0"]) == 0
    captured = capsys.readouterr()
    np.testing.assert_allclose([float(x) for x in captured.out.split()], [1.0] * 3, rtol=1e-15)
    assert "steps=" in captured.err


def test_eval_deterministic(tmp_path):
    mm = tmp_path / "g.mtx"
    cli.main(["gen", "laplacian9", "--grid", "8", "--out", str(mm)])
    texts = []
    for k in range(2):
        out = tmp_path / f"u{k}.txt"
        cli.main(["eval", "--matrix", str(mm), "--ones", "2", "--out", str(out)])
        texts.append(out.read_text())
    assert texts[0] == texts[1]


def test_missing_matrix_file(tmp_path, capsys):
    rc = cli.main(["eval", "--matrix", str(tmp_path / "nope.mtx"), "--ones", "0"])
    assert rc == cli.EXIT_USAGE
    assert "cannot read" in capsys.readouterr().err


def test_b_row_mismatch(tmp_path):
    mat = write_mm(tmp_path / "a.mtx", np.eye(3))
    bpath = tmp_path / "b.txt"
    np.savetxt(bpath, np.ones(4))
    assert cli.main(["eval", "--matrix", mat, "--b", str(bpath)]) == cli.EXIT_USAGE


def test_bad_arguments_exit_one(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["eval"])
    assert exc.value.code == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        cli.main(["gen", "banana"])
    assert exc.value.code == cli.EXIT_USAGE


def test_invalid_tolerance(tmp_path):
    mat = write_mm(tmp_path / "a.mtx", np.eye(2))
    assert cli.main(["eval", "--matrix", mat, "--ones", "0", "--tol", "0"]) == cli.EXIT_USAGE


def test_solver_failure_exit_two(tmp_path):
    a = np.random.default_rng(1).standard_normal((20, 20))
    mat = write_mm(tmp_path / "a.mtx", a)
    # no Krylov space of dimension 2 can meet this tolerance
    rc = cli.main(["eval", "--matrix", mat, "--ones", "0", "--tol", "1e-300", "--m-max", "2"])
    assert rc == cli.EXIT_SOLVER


@pytest.mark.parametrize("args, header", [
    (["laplacian9", "--grid", "30"], "900 900 7744"),
    (["laplacian9", "--grid", "2"], "4 4 16"),
    (["laplacian1d", "--n", "3"], "3 3 7"),
])
def test_gen_headers(tmp_path, args, header):
    out = tmp_path / "m.mtx"
    assert cli.main(["gen", *args, "--out", str(out)]) == 0
    lines = [ln for ln in out.read_text().splitlines() if not ln.startswith("%")]
    assert lines[0] == header


def test_gen_stdout_roundtrip(tmp_path, capsys):
    assert cli.main(["gen", "laplacian9", "--grid", "4"]) == 0
    text = capsys.readouterr().out
    path = tmp_path / "m.mtx"
    path.write_text(text)
    mat = linops.read_matrix_market(path)
    np.testing.assert_array_equal(mat.toarray(), linops.gen_laplacian9(4).toarray())


def test_gen_random_deterministic(tmp_path):
    paths = [tmp_path / "r1.mtx", tmp_path / "r2.mtx"]
    for p in paths:
        assert cli.main(["gen", "random", "--n", "40", "--seed", "3", "--out", str(p)]) == 0
    assert paths[0].read_text() == paths[1].read_text()
    mat = linops.read_matrix_market(paths[0])
    assert linops.inf_norm(linops.as_operator(mat)) == pytest.approx(1.0)


def test_gen_rejects_bad_grid():
    assert cli.main(["gen", "laplacian9", "--grid", "0"]) == cli.EXIT_USAGE


def test_bench_zero_matrix(tmp_path, capsys):
    mat = write_mm(tmp_path / "z.mtx", np.zeros((5, 5)))
    out = tmp_path / "bench.tsv"
    rc = cli.main(["bench", "--matrix", mat, "--ones", "2", "--repeat", "1",
                   "--fixed-m", "3", "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0].split("\t") == ["mode", *cli.BENCH_COLUMNS]
    assert lines[1].startswith("phip(m=3)") and lines[2].startswith("phipm")
    assert "speedup" in capsys.readouterr().out


def test_bench_roundtrip(tmp_path):
    mm = tmp_path / "g.mtx"
    cli.main(["gen", "laplacian9", "--grid", "10", "--out", str(mm)])
    mat = linops.read_matrix_market(mm)

    class Args:
        fixed_m = 20
        repeat = 1
        roundtrip = True
        t = 1.0
        tol = 1e-12
        symm = None
        m_init = 10
        m_max = 100
        ref_tol = 1e-12

    rows = cli.run_bench(mat, np.ones((mat.n, 1)), Args)
    assert [r["mode"] for r in rows] == ["phip(m=20)", "phipm"]
    for r in rows:
        assert r["rel_error"] <= 1e-6
        assert r["steps"] >= 2

import numpy as np
import pytest

from funcnet.covtest import CurvePanel
from funcnet.errors import InvalidArgument
from funcnet.io import (
    grid_sidecar_path,
    read_decisions,
    read_discrete,
    read_panel,
    read_replication_truths,
    read_truth,
    write_decisions,
    write_discrete,
    write_panel,
    write_replication_truths,
    write_truth,
)
from funcnet.quadrature import make_uniform_grid
from funcnet.simgen import discretize, sample_cov_panel


def make_panel(seed=0, n=6, p=3, L=11):
    grid = make_uniform_grid(L)
    rng = np.random.default_rng(seed)
    return CurvePanel(grid, rng.standard_normal((n, p, L)), centered=False)


def test_grid_sidecar_path():
    assert grid_sidecar_path("/a/b/panel.csv") == "/a/b/panel.grid.csv"
    assert grid_sidecar_path("panel") == "panel.grid.csv"


def test_panel_round_trip_bit_exact(tmp_path):
    panel = make_panel()
    path = tmp_path / "panel.csv"
    write_panel(panel, path)
    back = read_panel(path)
    assert np.array_equal(back.values, panel.values)
    assert np.array_equal(np.asarray(back.grid.points),
                          np.asarray(panel.grid.points))
    assert np.array_equal(np.asarray(back.grid.weights),
                          np.asarray(panel.grid.weights))


def test_panel_read_with_explicit_grid(tmp_path):
    panel = make_panel()
    path = tmp_path / "p.csv"
    write_panel(panel, path)
    back = read_panel(path, grid=panel.grid)
    assert np.array_equal(back.values, panel.values)


def test_panel_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c,d\n1,1,1,0.5\n")
    with pytest.raises(InvalidArgument):
        read_panel(path, grid=make_uniform_grid(2))


def test_panel_grid_length_mismatch(tmp_path):
    panel = make_panel(L=11)
    path = tmp_path / "p.csv"
    write_panel(panel, path)
    with pytest.raises(InvalidArgument):
        read_panel(path, grid=make_uniform_grid(7))


def test_panel_missing_cell(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("subject,variable,time_index,value\n"
                    "1,1,1,0.5\n1,1,2,0.25\n2,1,1,1.0\n")
    with pytest.raises(InvalidArgument):
        read_panel(path, grid=make_uniform_grid(2))


def test_discrete_round_trip(tmp_path):
    grid = make_uniform_grid(21)
    rng = np.random.default_rng(1)
    panel = sample_cov_panel(np.eye(2), 4, grid, rng)
    dp = discretize(panel, 9, 0.3, rng)
    path = tmp_path / "d.csv"
    write_discrete(dp, path)
    back = read_discrete(path)
    assert back.n == dp.n and back.p == dp.p
    for i in range(dp.n):
        for j in range(dp.p):
            t0, v0 = dp.observations[i][j]
            t1, v1 = back.observations[i][j]
            assert np.array_equal(t0, t1)
            assert np.array_equal(v0, v1)


def test_discrete_bad_header(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("x,y,z,w\n")
    with pytest.raises(InvalidArgument):
        read_discrete(path)


def test_discrete_missing_cell(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("subject,variable,time,value\n1,1,0.5,1.0\n2,2,0.5,1.0\n")
    with pytest.raises(InvalidArgument):
        read_discrete(path)


def test_truth_round_trip(tmp_path):
    pairs = {(0, 1), (2, 5), (1, 3)}
    path = tmp_path / "t.csv"
    write_truth(pairs, path)
    assert read_truth(path) == frozenset(pairs)


def test_decisions_round_trip(tmp_path):
    rows = [
        (0, "MFC", 0, 1, 12.5, 0.001, 3.2, True),
        (0, "MFC", 0, 2, 0.7, 0.9, -0.3, False),
        (1, "hard", 1, 2, 2.25, None, None, True),
    ]
    path = tmp_path / "dec.csv"
    write_decisions(rows, path)
    back = read_decisions(path)
    assert back == rows


def test_decisions_bad_header(tmp_path):
    path = tmp_path / "dec.csv"
    path.write_text("a,b\n")
    with pytest.raises(InvalidArgument):
        read_decisions(path)


def test_replication_truths_round_trip(tmp_path):
    truths = [(0, {(0, 1), (1, 2)}), (1, {(2, 3)})]
    path = tmp_path / "truth.csv"
    write_replication_truths(truths, path)
    back = read_replication_truths(path)
    assert back == {0: frozenset({(0, 1), (1, 2)}), 1: frozenset({(2, 3)})}

import numpy as np
import pytest

from funcnet.covtest import CurvePanel
from funcnet.errors import InvalidArgument, TooFewSubjects
from funcnet.quadrature import make_uniform_grid
from funcnet.threshbase import (
    apply_threshold,
    cv_threshold,
    cv_threshold_pairs,
    pair_hs_norms,
)


def test_apply_hard_kill_or_keep():
    norms = {(0, 1): 2.0, (0, 2): 0.5, (1, 2): 1.0}
    est = apply_threshold(norms, 1.0, "hard")
    assert est.adjacency == {(0, 1), (1, 2)}
    assert est.shrunk_norms is None


def test_apply_soft_shrinks():
    norms = {(0, 1): 2.0, (0, 2): 0.5}
    est = apply_threshold(norms, 0.5, "soft")
    assert est.adjacency == {(0, 1)}
    assert est.shrunk_norms[(0, 1)] == pytest.approx(1.5, rel=1e-12)
    assert est.shrunk_norms[(0, 2)] == 0.0


def test_soft_is_1_lipschitz_in_norm():
    # |S(a) - S(b)| <= |a - b| for the soft rule at fixed tau
    rng = np.random.default_rng(0)
    tau = 0.7
    for _ in range(200):
        a, b = rng.uniform(0, 3, 2)
        sa = apply_threshold({(0, 1): a}, tau, "soft").shrunk_norms[(0, 1)]
        sb = apply_threshold({(0, 1): b}, tau, "soft").shrunk_norms[(0, 1)]
        assert abs(sa - sb) <= abs(a - b) + 1e-12


def test_zero_threshold_keeps_everything():
    norms = {(0, 1): 2.0, (0, 2): 0.5, (1, 2): 0.0}
    hard = apply_threshold(norms, 0.0, "hard")
    assert hard.adjacency == set(norms)
    soft = apply_threshold(norms, 0.0, "soft")
    # soft at zero shrinks nothing; strictly positive norms survive
    assert soft.adjacency == {(0, 1), (0, 2)}
    for pr, nm in norms.items():
        assert soft.shrunk_norms[pr] == pytest.approx(nm, abs=1e-15)


def test_apply_threshold_validation():
    with pytest.raises(InvalidArgument):
        apply_threshold({}, -0.1, "hard")
    with pytest.raises(InvalidArgument):
        apply_threshold({}, 0.1, "medium")


def _panel_with_pair(rng, n=60, rho=0.9):
    """p=4 panel: variables 0,1 strongly dependent, 2,3 independent noise."""
    grid = make_uniform_grid(15)
    u = np.asarray(grid.points)
    f = np.sqrt(2) * np.sin(2 * np.pi * u)
    g = np.sqrt(2) * np.cos(2 * np.pi * u)
    values = np.empty((n, 4, 15))
    for i in range(n):
        z = rng.standard_normal(5)
        values[i, 0] = z[0] * f + 0.3 * z[1] * g
        values[i, 1] = rho * z[0] * f + 0.3 * z[2] * g
        values[i, 2] = z[3] * f
        values[i, 3] = z[4] * g
    return CurvePanel(grid, values, centered=False)


def test_pair_hs_norms_strong_pair_dominates():
    rng = np.random.default_rng(1)
    panel = _panel_with_pair(rng)
    norms = pair_hs_norms(panel)
    assert set(norms) == {(j, k) for j in range(4) for k in range(j + 1, 4)}
    assert norms[(0, 1)] == max(norms.values())


def test_pair_hs_norms_matches_direct_surface():
    # oracle: build the cross-covariance surface explicitly and take its norm
    from funcnet.covtest import center_panel
    from funcnet.quadrature import hs_norm_sq

    rng = np.random.default_rng(2)
    panel = center_panel(_panel_with_pair(rng, n=20))
    norms = pair_hs_norms(panel)
    n = panel.n
    for (j, k), nm in norms.items():
        surf = panel.values[:, j, :].T @ panel.values[:, k, :] / (n - 1)
        direct = np.sqrt(hs_norm_sq(surf, panel.grid))
        assert nm == pytest.approx(direct, rel=1e-10)


def test_cv_threshold_excludes_noise_keeps_signal():
    # over seeded runs the chosen threshold keeps the strong pair and
    # discards at least 90 percent of the pure-noise pairs
    kept_signal = 0
    noise_kept = 0
    noise_total = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        panel = _panel_with_pair(rng)
        tau = cv_threshold(panel, "hard", seed=seed)
        est = apply_threshold(pair_hs_norms(panel), tau, "hard")
        if (0, 1) in est.adjacency:
            kept_signal += 1
        for pr in ((0, 2), (0, 3), (1, 2), (1, 3), (2, 3)):
            noise_total += 1
            if pr in est.adjacency:
                noise_kept += 1
    assert kept_signal >= 18
    assert noise_kept <= 0.1 * noise_total


def test_cv_threshold_deterministic_given_seed():
    rng = np.random.default_rng(5)
    panel = _panel_with_pair(rng)
    t1 = cv_threshold(panel, "soft", seed=11)
    t2 = cv_threshold(panel, "soft", seed=11)
    assert t1 == t2


def test_cv_threshold_validation():
    rng = np.random.default_rng(0)
    panel = _panel_with_pair(rng, n=3)
    with pytest.raises(TooFewSubjects):
        cv_threshold(panel, "hard")
    panel = _panel_with_pair(rng, n=10)
    with pytest.raises(InvalidArgument):
        cv_threshold(panel, "firm")
    with pytest.raises(InvalidArgument):
        cv_threshold(panel, "hard", tau_grid=np.array([]))


def test_cv_threshold_pairs_agrees_with_panel_version():
    # feeding the raw curves as explicit pairs reproduces the panel result
    rng = np.random.default_rng(7)
    panel = _panel_with_pair(rng)
    from funcnet.covtest import center_panel
    cp = center_panel(panel)
    pairs = {
        (j, k): (cp.values[:, j, :], cp.values[:, k, :])
        for j in range(4) for k in range(j + 1, 4)
    }
    t_panel = cv_threshold(panel, "hard", seed=3)
    t_pairs = cv_threshold_pairs(pairs, panel.grid.weights, panel.n, "hard",
                                 seed=3)
    assert t_panel == pytest.approx(t_pairs, rel=1e-12)

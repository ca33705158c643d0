"""Hard and soft functional-thresholding baselines.

Pairs are kept or shrunk based on the Hilbert-Schmidt norm of their sample
cross-covariance surface; the threshold is chosen by repeated 50/50 subject
splits scoring the HS distance between thresholded train surfaces and test
surfaces.
"""

import math
from dataclasses import dataclass

import numpy as np

from .covtest import CurvePanel, center_panel, compute_grams
from .errors import InvalidArgument, TooFewSubjects

CV_SPLITS = 5
CV_GRID_SIZE = 30


@dataclass(frozen=True)
class ThresholdEstimate:
    mode: str                     # 'hard' | 'soft'
    tau_tilde: float
    adjacency: frozenset          # pairs (j,k) surviving the threshold
    norms: dict                   # pair -> HS norm of the sample surface
    shrunk_norms: dict = None     # soft mode only


def apply_threshold(norms: dict, tau_tilde: float, mode: str) -> ThresholdEstimate:
    """Kill-or-keep (hard) or shrink-toward-zero (soft) by HS norm."""
    if tau_tilde < 0:
        raise InvalidArgument("threshold must be nonnegative")
    if mode not in ("hard", "soft"):
        raise InvalidArgument(f"unknown mode {mode!r}")
    if mode == "hard":
        adj = frozenset(pr for pr, nm in norms.items() if nm >= tau_tilde)
        return ThresholdEstimate(mode, tau_tilde, adj, dict(norms))
    adj = frozenset(pr for pr, nm in norms.items() if nm > tau_tilde)
    shrunk = {
        pr: max(1.0 - tau_tilde / nm, 0.0) * nm if nm > 0 else 0.0
        for pr, nm in norms.items()
    }
    return ThresholdEstimate(mode, tau_tilde, adj, dict(norms), shrunk)


def pair_hs_norms(panel: CurvePanel) -> dict:
    """HS norms of all sample cross-covariance surfaces via the Gram trick."""
    panel = center_panel(panel)
    grams = compute_grams(panel)
    n = panel.n
    out = {}
    for j in range(panel.p):
        for k in range(j + 1, panel.p):
            hs_sq = float(np.sum(grams.matrices[j] * grams.matrices[k])) / (n - 1) ** 2
            out[(j, k)] = math.sqrt(max(hs_sq, 0.0))
    return out


def _split_stats(curve_pairs, weights, idx_a, idx_b):
    """Per-pair (train norm^2, test norm^2, cross inner product) for one split."""
    stats = {}
    for pr, (xj, xk) in curve_pairs.items():
        def surf(idx):
            a = xj[idx] - xj[idx].mean(axis=0, keepdims=True)
            b = xk[idx] - xk[idx].mean(axis=0, keepdims=True)
            return a.T @ b / (len(idx) - 1)
        sa = surf(idx_a)
        sb = surf(idx_b)
        wa = weights[:, None] * weights[None, :]
        stats[pr] = (
            float(np.sum(wa * sa * sa)),
            float(np.sum(wa * sb * sb)),
            float(np.sum(wa * sa * sb)),
        )
    return stats


def _cv_core(curve_pairs, weights, n, mode, splits, tau_grid, seed):
    scores = np.zeros(len(tau_grid))
    for r in range(splits):
        rng = np.random.default_rng(seed + r)  # split r uses derived seed
        perm = rng.permutation(n)
        half = n // 2
        stats = _split_stats(curve_pairs, weights, perm[:half], perm[half:])
        for ti, tau in enumerate(tau_grid):
            total = 0.0
            for tr_sq, te_sq, cross in stats.values():
                norm = math.sqrt(max(tr_sq, 0.0))
                if mode == "hard":
                    scale = 1.0 if norm >= tau else 0.0
                else:
                    scale = max(1.0 - tau / norm, 0.0) if norm > 0 else 0.0
                total += scale * scale * tr_sq - 2.0 * scale * cross + te_sq
            scores[ti] += total
    scores /= splits
    # minimal score, ties toward larger tau
    best = min(range(len(tau_grid)), key=lambda ti: (scores[ti], -tau_grid[ti]))
    return float(tau_grid[best])


def cv_threshold(panel: CurvePanel, mode: str, splits: int = CV_SPLITS,
                 tau_grid=None, seed: int = 0) -> float:
    """Cross-validated threshold from random half-splits of the subjects."""
    if panel.n < 4:
        raise TooFewSubjects("cross-validation needs n >= 4")
    if mode not in ("hard", "soft"):
        raise InvalidArgument(f"unknown mode {mode!r}")
    panel = center_panel(panel)
    curve_pairs = {
        (j, k): (panel.values[:, j, :], panel.values[:, k, :])
        for j in range(panel.p)
        for k in range(j + 1, panel.p)
    }
    if tau_grid is None:
        max_norm = max(pair_hs_norms(panel).values())
        tau_grid = np.linspace(0.0, 1.0, CV_GRID_SIZE) * max_norm
    tau_grid = np.asarray(tau_grid, dtype=float)
    if tau_grid.size == 0:
        raise InvalidArgument("empty threshold grid")
    return _cv_core(curve_pairs, panel.grid.weights, panel.n, mode, splits,
                    tau_grid, seed)


def cv_threshold_pairs(curve_pairs: dict, weights, n: int, mode: str,
                       splits: int = CV_SPLITS, tau_grid=None,
                       seed: int = 0) -> float:
    """Same CV scheme over explicit per-pair curve-matrix pairs.

    Used for graphical-model residual surfaces, where every pair has its own
    two curve sets.
    """
    if n < 4:
        raise TooFewSubjects("cross-validation needs n >= 4")
    if tau_grid is None:
        norms = {}
        w = np.asarray(weights)
        for pr, (xj, xk) in curve_pairs.items():
            a = xj - xj.mean(axis=0, keepdims=True)
            b = xk - xk.mean(axis=0, keepdims=True)
            s = a.T @ b / (n - 1)
            norms[pr] = math.sqrt(max(float(np.sum(w[:, None] * w[None, :] * s * s)), 0.0))
        tau_grid = np.linspace(0.0, 1.0, CV_GRID_SIZE) * max(norms.values())
    tau_grid = np.asarray(tau_grid, dtype=float)
    if tau_grid.size == 0:
        raise InvalidArgument("empty threshold grid")
    return _cv_core(curve_pairs, np.asarray(weights), n, mode, splits,
                    tau_grid, seed)

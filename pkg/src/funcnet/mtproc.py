"""Multiple testing layer: FDP estimation, threshold selection on the
normal-quantile scale, and the BH / Bonferroni baselines.

The threshold search is exact: the estimated FDP t -> Q(1-Phi(t))/max(1,R(t))
is continuous and decreasing on every interval where the rejection count
R(t) is constant, so the infimum over [0, t_max] is attained at one of the
per-interval solutions t_r = Phi^{-1}(1 - alpha*r/Q), clipped to its
interval. No grid search and no tolerance knob.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidLevel
from .nulldist import std_normal_quantile, std_normal_sf


@dataclass(frozen=True)
class TestBattery:
    """Q hypotheses as parallel arrays, lexicographic pair order."""

    __test__ = False          # not a test case despite the name

    pairs: tuple          # ((j,k), ...) with j < k
    pvalues: np.ndarray
    scores: np.ndarray    # V_q = Phi^{-1}(1 - pv_q)
    statistics: np.ndarray = None   # raw T values, carried for reporting

    def __post_init__(self):
        pv = np.asarray(self.pvalues, dtype=float)
        v = np.asarray(self.scores, dtype=float)
        if pv.shape != v.shape or pv.ndim != 1 or pv.size < 1:
            raise ValueError("pvalues and scores must be equal-length 1-d arrays")
        if not np.all(np.isfinite(v)):
            raise ValueError("scores must be finite (clamped transform upstream)")
        object.__setattr__(self, "pvalues", pv)
        object.__setattr__(self, "scores", v)
        if self.statistics is not None:
            t = np.asarray(self.statistics, dtype=float)
            if t.shape != pv.shape:
                raise ValueError("statistics must match pvalues in shape")
            object.__setattr__(self, "statistics", t)

    @property
    def Q(self):
        return self.pvalues.size


@dataclass(frozen=True)
class DiscoverySet:
    t_hat: float
    exists: bool
    rejected: frozenset   # pairs (j,k) with V >= t_hat
    fdp_hat_at_t: float
    alpha: float


def battery_from_records(records) -> TestBattery:
    return TestBattery(
        pairs=tuple((r.j, r.k) for r in records),
        pvalues=np.array([r.pvalue for r in records]),
        scores=np.array([r.V for r in records]),
        statistics=np.array([r.T for r in records]),
    )


def fdp_hat(t, battery: TestBattery) -> float:
    """Q(1 - Phi(t)) over the rejection count at t, denominator floored at 1."""
    R = int(np.sum(battery.scores >= t))
    return float(battery.Q * std_normal_sf(t) / max(R, 1))


def threshold_cap(Q: int) -> float:
    """Search-range cap sqrt(2 log Q - 2 log log Q), floored at 0 for small Q."""
    if Q < 2:
        return 0.0
    inner = 2.0 * math.log(Q) - 2.0 * math.log(math.log(Q))
    return math.sqrt(max(inner, 0.0))


def select_threshold(battery: TestBattery, alpha: float) -> DiscoverySet:
    """Smallest t in [0, t_max] with estimated FDP <= alpha, else the fallback.

    On the interval where R(t) = r, feasibility is t >= Phi^{-1}(1 - alpha*r/Q)
    (denominator max(r,1)); the infimum over the union of intervals is the
    smallest clipped per-interval solution.
    """
    if not 0.0 < alpha < 1.0:
        raise InvalidLevel(f"alpha must be in (0,1), got {alpha}")
    Q = battery.Q
    t_max = threshold_cap(Q)
    v_desc = np.sort(battery.scores)[::-1]
    best = None
    for r in range(Q + 1):
        hi = t_max if r == 0 else min(v_desc[r - 1], t_max)
        lo = 0.0 if r == Q else max(v_desc[r], 0.0)
        if hi < lo:
            continue  # empty interval (ties or out of range)
        frac = alpha * max(r, 1) / Q
        t_r = -math.inf if frac >= 1.0 else float(std_normal_quantile(1.0 - frac))
        cand = max(t_r, lo)
        if cand <= hi:
            best = cand if best is None else min(best, cand)
    if best is None:
        t_hat = math.sqrt(2.0 * math.log(Q)) if Q >= 2 else 0.0
        exists = False
    else:
        t_hat = best
        exists = True
    rej = frozenset(
        p for p, v in zip(battery.pairs, battery.scores) if v >= t_hat
    )
    return DiscoverySet(
        t_hat=t_hat,
        exists=exists,
        rejected=rej,
        fdp_hat_at_t=fdp_hat(t_hat, battery),
        alpha=alpha,
    )


def bh_procedure(battery: TestBattery, alpha: float) -> frozenset:
    """Benjamini-Hochberg step-up rule on the Q p-values."""
    if not 0.0 < alpha < 1.0:
        raise InvalidLevel(f"alpha must be in (0,1), got {alpha}")
    Q = battery.Q
    order = np.argsort(battery.pvalues, kind="stable")
    sorted_pv = battery.pvalues[order]
    thresh = alpha * np.arange(1, Q + 1) / Q
    passing = np.nonzero(sorted_pv <= thresh)[0]
    if passing.size == 0:
        return frozenset()
    kstar = passing[-1] + 1
    return frozenset(battery.pairs[i] for i in order[:kstar])


def bonferroni(battery: TestBattery, alpha: float) -> frozenset:
    """Reject iff pvalue <= alpha / Q."""
    if not 0.0 < alpha < 1.0:
        raise InvalidLevel(f"alpha must be in (0,1), got {alpha}")
    cut = alpha / battery.Q
    return frozenset(
        p for p, pv in zip(battery.pairs, battery.pvalues) if pv <= cut
    )

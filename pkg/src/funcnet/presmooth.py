"""Local linear reconstruction of curves from noisy discrete observations.

Each curve is smoothed independently with a Gaussian kernel and a
per-variable common bandwidth h_j = c * Tbar_j^{-1/5}, Tbar_j the harmonic
mean of that variable's sampling frequencies.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .covtest import CurvePanel
from .errors import InvalidArgument, NoData
from .quadrature import FunctionGrid

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class DiscretePanel:
    """Per-(subject, variable) lists of (time, value) observations."""

    n: int
    p: int
    # observations[i][j] = (times array, values array), lengths may differ
    observations: list

    def __post_init__(self):
        if len(self.observations) != self.n:
            raise InvalidArgument("observations must have n subject entries")
        for row in self.observations:
            if len(row) != self.p:
                raise InvalidArgument("each subject needs p variable entries")
            for times, values in row:
                t = np.asarray(times, dtype=float)
                if t.size < 1:
                    raise NoData("every (i,j) needs at least one observation")
                if np.any(t < 0) or np.any(t > 1):
                    raise InvalidArgument("times must lie in [0,1]")


@dataclass(frozen=True)
class SmootherConfig:
    bandwidth_constant: float = 1.0
    ridge: float = 1e-8
    kernel: str = field(default="gaussian")

    def __post_init__(self):
        if self.bandwidth_constant <= 0:
            raise InvalidArgument("bandwidth constant must be positive")
        if self.ridge < 0:
            raise InvalidArgument("ridge must be nonnegative")
        if self.kernel != "gaussian":
            raise InvalidArgument("only the Gaussian kernel is supported")


def harmonic_mean_frequency(dp: DiscretePanel, j: int) -> float:
    """Tbar_j = (n^{-1} sum_i T_ij^{-1})^{-1}."""
    inv = [1.0 / len(dp.observations[i][j][0]) for i in range(dp.n)]
    return dp.n / sum(inv)


def local_linear_fit(times, values, bandwidth, grid: FunctionGrid):
    """Kernel-weighted degree-1 fit at every grid point; returns (curve, flagged).

    ``flagged`` is True when a degenerate local design forced the
    nearest-observation fallback or the single-observation constant fit.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.size == 0:
        raise NoData("empty observation list")
    if bandwidth <= 0:
        raise InvalidArgument("bandwidth must be positive")
    u = grid.points
    if t.size == 1:
        return np.full(len(grid), y[0]), True

    d = t[None, :] - u[:, None]                      # L x T
    w = _INV_SQRT_2PI * np.exp(-0.5 * (d / bandwidth) ** 2) / bandwidth
    s0 = w.sum(axis=1)
    s1 = (w * d).sum(axis=1)
    s2 = (w * d * d).sum(axis=1)
    t0 = (w * y[None, :]).sum(axis=1)
    t1 = (w * d * y[None, :]).sum(axis=1)

    det = s0 * s2 - s1 * s1
    trace_sq = (s0 + s2) ** 2
    bad = det <= 1e-12 * trace_sq
    curve = np.empty(len(grid))
    ok = ~bad
    curve[ok] = (s2[ok] * t0[ok] - s1[ok] * t1[ok]) / det[ok]
    flagged = False
    if np.any(bad):
        # ridge the 2x2 normal equations where nearly singular
        ridge = 1e-8 * (s0[bad] + s2[bad])
        det_r = (s0[bad] + ridge) * (s2[bad] + ridge) - s1[bad] ** 2
        zero_w = s0[bad] <= 1e-300
        vals = (s2[bad] + ridge) * t0[bad] - s1[bad] * t1[bad]
        fit = np.where(det_r > 0, vals / np.where(det_r > 0, det_r, 1.0), 0.0)
        curve[bad] = fit
        if np.any(zero_w):
            # isolated grid points with numerically zero weight mass:
            # fall back to the nearest observation
            idx = np.flatnonzero(bad)[zero_w]
            for g in idx:
                curve[g] = y[np.argmin(np.abs(t - u[g]))]
            flagged = True
    return curve, flagged


def smooth_panel(dp: DiscretePanel, grid: FunctionGrid,
                 cfg: SmootherConfig = SmootherConfig()) -> CurvePanel:
    """Reconstruct every curve with its variable-specific bandwidth."""
    bandwidths = [
        cfg.bandwidth_constant * harmonic_mean_frequency(dp, j) ** (-0.2)
        for j in range(dp.p)
    ]
    out = np.empty((dp.n, dp.p, len(grid)))
    for i in range(dp.n):
        for j in range(dp.p):
            times, values = dp.observations[i][j]
            try:
                out[i, j], _ = local_linear_fit(times, values, bandwidths[j], grid)
            except NoData as exc:
                raise NoData(f"curve (subject={i + 1}, variable={j + 1}): {exc}") from exc
    return CurvePanel(grid, out, centered=False)

"""Evaluation grids on [0,1] and quadrature-based inner products / norms.

Every integral in the package reduces to a weighted sum over a
:class:`FunctionGrid`; the default is a midpoint (rectangle) rule on a
uniform grid, with trapezoidal weights available for user-supplied
non-uniform grids.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidGrid


@dataclass(frozen=True)
class FunctionGrid:
    """Ordered evaluation points in [0,1] with positive weights summing to 1."""

    points: np.ndarray
    weights: np.ndarray
    _sqrt_weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        wts = np.asarray(self.weights, dtype=float)
        if pts.ndim != 1 or wts.ndim != 1 or pts.shape != wts.shape:
            raise InvalidGrid("points and weights must be 1-d arrays of equal length")
        if pts.size < 2:
            raise InvalidGrid("grid needs at least 2 points")
        if np.any(np.diff(pts) <= 0):
            raise InvalidGrid("points must be strictly increasing")
        if pts[0] < 0.0 or pts[-1] > 1.0:
            raise InvalidGrid("points must lie in [0,1]")
        if np.any(wts <= 0):
            raise InvalidGrid("weights must be positive")
        if abs(wts.sum() - 1.0) > 1e-12:
            raise InvalidGrid("weights must sum to 1 (|U| = 1)")
        pts.setflags(write=False)
        wts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)
        sw = np.sqrt(wts)
        sw.setflags(write=False)
        object.__setattr__(self, "_sqrt_weights", sw)

    def __len__(self):
        return self.points.size


def make_uniform_grid(L: int) -> FunctionGrid:
    """Midpoint grid u_t = (t - 1/2)/L with weights 1/L."""
    if L < 2:
        raise InvalidGrid(f"L must be >= 2, got {L}")
    t = np.arange(1, L + 1, dtype=float)
    return FunctionGrid((t - 0.5) / L, np.full(L, 1.0 / L))


def make_trapezoid_grid(points) -> FunctionGrid:
    """Trapezoidal weights for a user-supplied (possibly non-uniform) grid."""
    pts = np.asarray(points, dtype=float)
    if pts.size < 2:
        raise InvalidGrid("need at least 2 points")
    w = np.empty_like(pts)
    d = np.diff(pts)
    w[0] = d[0] / 2
    w[-1] = d[-1] / 2
    w[1:-1] = (d[:-1] + d[1:]) / 2
    # rescale so the domain has total mass 1
    w /= w.sum()
    return FunctionGrid(pts, w)


def inner_product(f, g, grid: FunctionGrid) -> float:
    """Quadrature inner product sum_t w_t f(u_t) g(u_t)."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != (len(grid),) or g.shape != (len(grid),):
        raise DimensionMismatch("vector length must match grid")
    return float(np.sum(grid.weights * f * g))


def hs_norm_sq(surface, grid: FunctionGrid) -> float:
    """Squared Hilbert-Schmidt norm sum_{s,t} w_s w_t surface[s,t]^2."""
    S = np.asarray(surface, dtype=float)
    L = len(grid)
    if S.shape != (L, L):
        raise DimensionMismatch(f"surface must be {L}x{L}")
    ws = grid._sqrt_weights
    return float(np.sum((ws[:, None] * S * ws[None, :]) ** 2))


def write_grid(grid: FunctionGrid, path) -> None:
    """Sidecar format: one 'point,weight' pair per line."""
    with open(path, "w") as fh:
        for u, w in zip(grid.points, grid.weights):
            fh.write(f"{float(u)!r},{float(w)!r}\n")


def read_grid(path) -> FunctionGrid:
    pts, wts = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            u, w = line.split(",")
            pts.append(float(u))
            wts.append(float(w))
    return FunctionGrid(np.array(pts), np.array(wts))

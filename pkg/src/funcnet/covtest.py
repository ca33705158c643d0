"""Pairwise cross-covariance testing core.

Centered curve panels, per-variable Gram matrices, sample cross-covariance
surfaces, the Hilbert-Schmidt test statistic T = n * ||Sigma_hat_jk||^2 and
the first four eigenvalue cumulants of the estimated asymptotic covariance
of sqrt(n) * Sigma_hat_jk.

The O(p^2) pair loop never materializes an L^2 x L^2 object: with
A_j[i,i'] = <Xc_ij, Xc_i'j> and H = A_j * A_k (elementwise), the statistic
is n/(n-1)^2 * sum(H), and the nonzero eigenvalues of the discretized
asymptotic covariance operator coincide with those of M/n, where M is H
doubly adjusted by its row/column means with divisor n-1.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidPair,
    NotCentered,
    NumericalDegeneracy,
    TooFewSubjects,
)
from .quadrature import FunctionGrid

CUMULANT_CLAMP = 1e-10


@dataclass(frozen=True)
class CurvePanel:
    """n x p x L tensor of curve values on a common grid."""

    grid: FunctionGrid
    values: np.ndarray
    centered: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 3:
            raise DimensionMismatch("values must be an n x p x L tensor")
        if v.shape[0] < 2 or v.shape[1] < 1 or v.shape[2] != len(self.grid):
            raise DimensionMismatch(
                f"inconsistent panel shape {v.shape} for grid of length {len(self.grid)}"
            )
        object.__setattr__(self, "values", v)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def p(self):
        return self.values.shape[1]

    @property
    def L(self):
        return self.values.shape[2]


@dataclass(frozen=True)
class GramSet:
    """p symmetric n x n matrices A_j[i,i'] = <Xc_ij, Xc_i'j>."""

    n: int
    p: int
    matrices: np.ndarray  # p x n x n


@dataclass(frozen=True)
class PairTestRecord:
    j: int
    k: int
    T: float
    cumulants: tuple
    pvalue: float = float("nan")
    V: float = float("nan")


def center_panel(panel: CurvePanel) -> CurvePanel:
    """Subtract the per-variable subject-mean curve. Idempotent."""
    if panel.n < 2:
        raise TooFewSubjects("centering needs n >= 2")
    if panel.centered:
        return panel
    vals = panel.values - panel.values.mean(axis=0, keepdims=True)
    return CurvePanel(panel.grid, vals, centered=True)


def compute_grams(panel: CurvePanel) -> GramSet:
    """Gram matrices of the centered panel under the grid inner product."""
    if not panel.centered:
        raise NotCentered("compute_grams requires a centered panel")
    X = panel.values * panel.grid.weights[None, None, :]
    # A_j = Xc_j W Xc_j^T for each variable
    mats = np.einsum("ijl,kjl->jik", X, panel.values, optimize=True)
    mats = 0.5 * (mats + mats.transpose(0, 2, 1))
    return GramSet(n=panel.n, p=panel.p, matrices=mats)


def cross_cov_surface(panel: CurvePanel, j: int, k: int) -> np.ndarray:
    """Sample cross-covariance surface with divisor n-1, as an L x L array."""
    if not panel.centered:
        raise NotCentered("cross_cov_surface requires a centered panel")
    if not (0 <= j < panel.p and 0 <= k < panel.p):
        raise IndexError(f"variable index out of range: ({j}, {k})")
    Xj = panel.values[:, j, :]
    Xk = panel.values[:, k, :]
    return Xj.T @ Xk / (panel.n - 1)


def pair_statistic(grams: GramSet, j: int, k: int, n: int) -> float:
    """HS test statistic via the Gram trick: n/(n-1)^2 * sum(A_j * A_k)."""
    if j == k:
        raise InvalidPair("pair statistic requires j != k")
    H = grams.matrices[j] * grams.matrices[k]
    return float(n * H.sum() / (n - 1) ** 2)


def _cumulants_from_gram_product(H: np.ndarray, n: int):
    """Cumulants c_r = trace((M/n)^r), r=1..4, from the pair Gram product H."""
    row = H.sum(axis=0) / (n - 1)
    tot = row.sum() / (n - 1)
    M = H - row[None, :] - row[:, None] + tot
    c1 = float(np.trace(M)) / n
    c2 = float(np.sum(M * M)) / n**2
    M2 = M @ M
    c3 = float(np.sum(M * M2)) / n**3
    c4 = float(np.sum(M2 * M2)) / n**4
    out = []
    for c in (c1, c2, c3, c4):
        if c < -CUMULANT_CLAMP:
            raise NumericalDegeneracy(f"cumulant {c} below clamping range")
        out.append(max(c, 0.0))
    return tuple(out)


def gamma_cumulants(grams: GramSet, j: int, k: int, n: int):
    """First four eigenvalue-power sums of the estimated null covariance."""
    if j == k:
        raise InvalidPair("cumulants require j != k")
    if n < 3:
        raise TooFewSubjects("cumulants require n >= 3")
    H = grams.matrices[j] * grams.matrices[k]
    return _cumulants_from_gram_product(H, n)


def pair_record_from_grams(grams: GramSet, j: int, k: int, n: int) -> PairTestRecord:
    H = grams.matrices[j] * grams.matrices[k]
    T = float(n * H.sum() / (n - 1) ** 2)
    return PairTestRecord(j=j, k=k, T=T, cumulants=_cumulants_from_gram_product(H, n))


def pair_record_from_gram_pair(A1, A2, n, j=0, k=1) -> PairTestRecord:
    """Record for one pair given the two centered curve-set Gram matrices.

    Used by the graphical-model pipeline, where each pair has its own two
    residual curve sets rather than a shared panel.
    """
    H = A1 * A2
    T = float(n * H.sum() / (n - 1) ** 2)
    return PairTestRecord(j=j, k=k, T=T, cumulants=_cumulants_from_gram_product(H, n))


def gram_of_curves(curves: np.ndarray, grid: FunctionGrid, center=True) -> np.ndarray:
    """n x n Gram matrix of an n x L curve matrix, optionally centered."""
    C = np.asarray(curves, dtype=float)
    if center:
        C = C - C.mean(axis=0, keepdims=True)
    A = (C * grid.weights[None, :]) @ C.T
    return 0.5 * (A + A.T)


def all_pair_records(panel: CurvePanel):
    """Statistics and cumulants for all Q = p(p-1)/2 pairs, (j,k) lexicographic."""
    if panel.n < 3:
        raise TooFewSubjects("pair testing requires n >= 3")
    if panel.p < 2:
        raise InvalidPair("pair testing requires p >= 2")
    panel = center_panel(panel)
    grams = compute_grams(panel)
    n = panel.n
    return [
        pair_record_from_grams(grams, j, k, n)
        for j in range(panel.p)
        for k in range(j + 1, panel.p)
    ]


def fill_pvalues(records, pvalue_fn):
    """Attach p-values and normal-quantile scores produced by ``pvalue_fn``.

    ``pvalue_fn(T, cumulants) -> (pvalue, V)`` is supplied by the null
    distribution layer; kept as a callback so this module stays free of
    distributional code.
    """
    return [
        replace(r, pvalue=pv, V=v)
        for r in records
        for pv, v in (pvalue_fn(r.T, r.cumulants),)
    ]

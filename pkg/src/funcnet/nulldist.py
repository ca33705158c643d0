"""Null distribution of the HS statistic: a chi-square mixture approximated
by a noncentral chi-square matched on four eigenvalue cumulants.

Given c_r = sum_m lambda_m^r (r = 1..4) of the estimated asymptotic
covariance operator, the mixture sum_m lambda_m * chi2_1 is approximated by
mu + sigma * (chi2_df(delta) - df - delta) / sqrt(2(df + 2*delta)) with
mu = c1, sigma = sqrt(2*c2), and (df, delta) chosen from the skewness and
kurtosis ratios s1 = c3/c2^{3/2}, s2 = c4/c2^2.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, gammaincc, ndtri

from .errors import DegenerateNull, InvalidArgument, InvalidStatistic

PVALUE_FLOOR = 1e-15


def std_normal_cdf(x):
    return 0.5 * erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))


def std_normal_sf(x):
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def std_normal_quantile(p):
    return ndtri(p)


@dataclass(frozen=True)
class MixtureNull:
    cumulants: tuple
    mu: float
    sigma: float
    s1: float
    s2: float
    a: float
    delta: float
    ell: float
    gaussian_limit: bool = False  # zero-skewness fallback: normal tail only


def fit_mixture_null(c1, c2, c3, c4) -> MixtureNull:
    """Four-cumulant noncentral chi-square fit to the mixture null."""
    if min(c1, c2, c3, c4) < 0:
        raise InvalidArgument("cumulants must be nonnegative")
    if c2 == 0.0:
        raise DegenerateNull("c2 = 0: null is a point mass at zero")
    mu = c1
    sigma = math.sqrt(2.0 * c2)
    if c3 == 0.0:
        # zero skewness: the matched chi-square degenerates; use the
        # Gaussian limit of the standardized statistic instead
        return MixtureNull(
            (c1, c2, c3, c4), mu, sigma, 0.0, c4 / c2**2, math.inf,
            0.0, math.inf, gaussian_limit=True,
        )
    s1 = c3 / c2**1.5
    s2 = c4 / c2**2
    if s1**2 > s2:
        a = 1.0 / (s1 - math.sqrt(s1**2 - s2))
        delta = s1 * a**3 - a**2
        ell = a**2 - 2.0 * delta
    else:
        a = 1.0 / s1
        delta = 0.0
        ell = c2**3 / c3**2
    return MixtureNull((c1, c2, c3, c4), mu, sigma, s1, s2, a, delta, ell)


def noncentral_chisq_sf(x, ell, delta) -> float:
    """Survival function via the Poisson-weighted central chi-square series.

    Terms are added until the remaining Poisson(delta/2) mass is below
    1e-13; each central term uses the regularized upper incomplete gamma.
    """
    if not (math.isfinite(x) and math.isfinite(ell) and math.isfinite(delta)):
        raise InvalidArgument("nonfinite input to noncentral_chisq_sf")
    if ell <= 0 or delta < 0:
        raise InvalidArgument("require ell > 0 and delta >= 0")
    if x <= 0:
        return 1.0
    lam = delta / 2.0
    if lam == 0.0:
        return float(gammaincc(ell / 2.0, x / 2.0))
    # Poisson weights accumulated until mass 1 - 1e-13 is covered
    w = math.exp(-lam)
    total_mass = w
    sf = w * float(gammaincc(ell / 2.0, x / 2.0))
    k = 0
    while 1.0 - total_mass > 1e-13:
        k += 1
        w *= lam / k
        total_mass += w
        sf += w * float(gammaincc(ell / 2.0 + k, x / 2.0))
        if k > 100000:  # unreachable for sane delta; guards infinite loop
            break
    return min(max(sf, 0.0), 1.0)


def pvalue(T, null: MixtureNull) -> float:
    """Upper-tail probability of the fitted null at T, clamped away from 0/1."""
    if T < 0:
        raise InvalidStatistic(f"statistic must be nonnegative, got {T}")
    tstar = (T - null.mu) / null.sigma
    if null.gaussian_limit:
        pv = float(std_normal_sf(tstar))
    else:
        x = tstar * math.sqrt(2.0 * (null.ell + 2.0 * null.delta)) + null.ell + null.delta
        pv = noncentral_chisq_sf(x, null.ell, null.delta)
    return float(min(max(pv, PVALUE_FLOOR), 1.0 - PVALUE_FLOOR))


def degenerate_pvalue(T) -> float:
    """Point-mass null (c2 = 0): any positive statistic is maximally extreme."""
    return PVALUE_FLOOR if T > 0 else 1.0 - PVALUE_FLOOR


def normal_quantile_transform(pv) -> float:
    """V = Phi^{-1}(1 - pv), defined on the clamped p-value range."""
    if not PVALUE_FLOOR <= pv <= 1.0 - PVALUE_FLOOR:
        raise InvalidArgument(f"p-value {pv} outside clamped range")
    return float(ndtri(1.0 - pv))


def pvalue_and_score(T, cumulants):
    """(p-value, V) from a statistic and its cumulants; handles degeneracy."""
    try:
        null = fit_mixture_null(*cumulants)
    except DegenerateNull:
        pv = degenerate_pvalue(T)
        return pv, normal_quantile_transform(pv)
    pv = pvalue(T, null)
    return pv, normal_quantile_transform(pv)

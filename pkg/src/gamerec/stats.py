"""Scalar statistics behind preference-informed edge reweighting.

Dwelling times and average ratings live in different spaces; a Box-Cox
transform followed by Z-score normalization maps both into approximately
standard-normal space, where they can be compared through the Fisher
statistic F = t^2 / r^2 ~ F(1, 1). This module provides the transform
pipeline, a one-sample Kolmogorov-Smirnov normality check, F(1, 1) upper
quantiles, the information-content magnitude, and the interest/disinterest
sign decision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

LOG_TWO_PI = math.log(2.0 * math.pi)

# |lambda| below this is treated as the log branch of the transform.
LAMBDA_ZERO_EPS = 1e-12
# Guards the F ratio when a mapped rating is exactly zero.
RATIO_EPS = 1e-12
# Search bracket for the Box-Cox exponent; outside it the transform is
# numerically unstable at the sample sizes this package targets.
LAMBDA_BRACKET = (-5.0, 5.0)
# Kolmogorov series terms below this are dropped.
KOLMOGOROV_TERM_EPS = 1e-12


@dataclass(frozen=True)
class NormalizedSample:
    """Z-normalized Box-Cox output together with the fit parameters."""

    values: np.ndarray
    lambda_bc: float
    mean: float
    std: float


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    n: int


def box_cox_transform(y, lam: float):
    """Apply the Box-Cox transform (y^lam - 1)/lam, or ln(y) when lam ~ 0.

    Accepts a scalar or an array; every value must be strictly positive.
    """
    arr = np.asarray(y, dtype=float)
    if np.any(arr <= 0.0):
        raise ValueError("box_cox_transform requires strictly positive input")
    if abs(lam) <= LAMBDA_ZERO_EPS:
        out = np.log(arr)
    else:
        out = (np.power(arr, lam) - 1.0) / lam
    return float(out) if np.isscalar(y) else out


def box_cox_log_likelihood(sample: np.ndarray, lam: float) -> float:
    """Profile log-likelihood of the Box-Cox exponent.

    Uses the biased (maximum-likelihood) variance of the transformed data:
    LL(lam) = -n/2 * ln(sigma_hat^2) + (lam - 1) * sum(ln y).
    """
    z = box_cox_transform(sample, lam)
    var = float(np.var(z))
    if var <= 0.0 or not math.isfinite(var):
        return -math.inf
    n = len(sample)
    return -0.5 * n * math.log(var) + (lam - 1.0) * float(np.sum(np.log(sample)))


def box_cox_lambda(sample) -> float:
    """Maximum-likelihood Box-Cox exponent over the bracket [-5, 5].

    Requires at least 3 strictly positive values with nonzero spread.
    """
    arr = np.asarray(sample, dtype=float)
    if arr.ndim != 1 or len(arr) < 3:
        raise ValueError("box_cox_lambda needs a 1-d sample of size >= 3")
    if np.any(arr <= 0.0):
        raise ValueError("box_cox_lambda requires strictly positive input")
    if np.ptp(arr) == 0.0:
        raise ValueError("box_cox_lambda is undefined for a constant sample")
    res = optimize.minimize_scalar(
        lambda lam: -box_cox_log_likelihood(arr, lam),
        bounds=LAMBDA_BRACKET,
        method="bounded",
        options={"xatol": 1e-6},
    )
    return float(res.x)


def z_normalize(sample, lambda_bc: float = float("nan")) -> NormalizedSample:
    """Center and scale to zero mean and unit population variance."""
    arr = np.asarray(sample, dtype=float)
    if arr.ndim != 1 or len(arr) < 2:
        raise ValueError("z_normalize needs a 1-d sample of size >= 2")
    mean = float(np.mean(arr))
    std = float(np.sqrt(np.var(arr)))
    if std <= 0.0:
        raise ValueError("z_normalize is undefined for a constant sample")
    return NormalizedSample(values=(arr - mean) / std, lambda_bc=lambda_bc, mean=mean, std=std)


def to_standard_normal(sample) -> NormalizedSample:
    """Box-Cox (MLE exponent) followed by Z-score normalization.

    Both stages are strictly increasing on positive input, so rank order
    is preserved.
    """
    arr = np.asarray(sample, dtype=float)
    lam = box_cox_lambda(arr)
    return z_normalize(box_cox_transform(arr, lam), lambda_bc=lam)


def standard_normal_cdf(x):
    """Phi(x) via the error function."""
    return 0.5 * (1.0 + special.erf(np.asarray(x, dtype=float) / math.sqrt(2.0)))


def kolmogorov_cdf(x: float) -> float:
    """CDF of the Kolmogorov distribution,
    F_K(x) = sqrt(2*pi)/x * sum_k exp(-(2k-1)^2 pi^2 / (8 x^2)).
    """
    if x <= 0.0:
        return 0.0
    # For tiny x every term underflows; the limit is 0.
    if x < 1e-6:
        return 0.0
    total = 0.0
    k = 1
    while True:
        term = math.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8.0 * x * x))
        total += term
        if term < KOLMOGOROV_TERM_EPS:
            break
        k += 1
    return min(1.0, math.sqrt(2.0 * math.pi) / x * total)


def ks_test_standard_normal(sample) -> KsResult:
    """One-sample KS test against the standard normal distribution.

    D_n = sup_x |F_n(x) - Phi(x)| evaluated at the sorted sample points;
    the p-value is the asymptotic 1 - F_K(sqrt(n) * D_n), which is an
    approximation for small n.
    """
    arr = np.sort(np.asarray(sample, dtype=float))
    n = len(arr)
    if n < 1:
        raise ValueError("ks_test_standard_normal needs a nonempty sample")
    cdf = standard_normal_cdf(arr)
    i = np.arange(1, n + 1, dtype=float)
    d_plus = np.max(i / n - cdf)
    d_minus = np.max(cdf - (i - 1.0) / n)
    d = float(max(d_plus, d_minus))
    p = 1.0 - kolmogorov_cdf(math.sqrt(n) * d)
    return KsResult(statistic=d, p_value=min(1.0, max(0.0, p)), n=n)


def fisher_cdf(x: float) -> float:
    """P(F(1,1) <= x) = I_{x/(x+1)}(1/2, 1/2) (regularized incomplete beta)."""
    if x <= 0.0:
        return 0.0
    return float(special.betainc(0.5, 0.5, x / (x + 1.0)))


def fisher_upper_quantile(alpha: float, mode: str = "algorithm") -> float:
    """Upper quantile Q_alpha of the F(1, 1) distribution.

    mode="algorithm" returns (1 - alpha)/alpha, the surrogate used by the
    edge-reweighting procedure; mode="exact" inverts the true F(1, 1) CDF
    by bisection to 1e-9 relative tolerance.
    """
    if not 0.0 < alpha <= 0.5:
        raise ValueError(f"alpha must lie in (0, 0.5], got {alpha}")
    if mode == "algorithm":
        # 1/a - 1 == (1 - a)/a, with cleaner rounding at round alphas
        return 1.0 / alpha - 1.0
    if mode != "exact":
        raise ValueError(f"unknown quantile mode {mode!r}")
    target = 1.0 - alpha
    lo, hi = 0.0, 1.0
    while fisher_cdf(hi) < target:
        hi *= 2.0
    while hi - lo > 1e-9 * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if fisher_cdf(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def information_content(t: float, r: float, half_exponent: bool = False) -> float:
    """Information content of an observed (time, rating) pair.

    ln(2*pi) + t^2 + r^2 under the exp(-x^2) density convention used by the
    reweighting procedure; half_exponent=True switches to the exp(-x^2/2)
    convention, i.e. ln(2*pi) + (t^2 + r^2)/2.
    """
    q = t * t + r * r
    if half_exponent:
        q *= 0.5
    return LOG_TWO_PI + q


def per_sign(t: float, r: float, q: float) -> int:
    """Sign decision for one interaction: +1 significant interest,
    -1 significant disinterest, 0 otherwise.

    Significance means F = t^2 / max(r^2, eps) > q; the sign follows t.
    """
    if q <= 0.0:
        raise ValueError("quantile threshold must be positive")
    f = t * t / max(r * r, RATIO_EPS)
    if f > q:
        return 1 if t > 0.0 else -1
    return 0

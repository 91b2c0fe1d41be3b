"""Proportion tests, Holm-Bonferroni pooling, Cohen's h and hypergeometric tails."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_SIDED = "two-sided"
GREATER = "greater"

_SQRT2 = math.sqrt(2.0)


def norm_cdf(x):
    """Standard normal CDF via the complementary error function.

    ``erfc`` keeps full relative precision in the tails, so both
    ``norm_cdf(-8)`` and ``norm_cdf(8)`` are accurate to double precision.
    """
    return 0.5 * math.erfc(-x / _SQRT2)


def _check_counts(n1, N1, n2, N2):
    for name, v in (("n1", n1), ("N1", N1), ("n2", n2), ("N2", N2)):
        if int(v) != v:
            raise ValueError(f"{name} must be an integer count, got {v!r}")
    if N1 < 1 or N2 < 1:
        raise ValueError("N1 and N2 must be at least 1")
    if not (0 <= n1 <= N1 and 0 <= n2 <= N2):
        raise ValueError(f"counts out of range: n1={n1}, N1={N1}, n2={n2}, N2={N2}")


def two_proportion_z(n1, N1, n2, N2, alternative=TWO_SIDED, continuity=True):
    """Pooled-variance z statistic for ``p2 - p1``; ``None`` when the pooled variance is zero.

    With ``continuity`` the difference is shrunk toward zero by
    ``(1/N1 + 1/N2) / 2`` and clamped at zero. For the ``greater`` alternative
    only a positive difference is shrunk, so the correction never makes the
    one-sided p-value smaller.
    """
    _check_counts(n1, N1, n2, N2)
    n1, N1, n2, N2 = int(n1), int(N1), int(n2), int(N2)
    pooled = (n1 + n2) / (N1 + N2)
    var = pooled * (1.0 - pooled) * (1.0 / N1 + 1.0 / N2)
    if var <= 0.0:
        return None
    # work on the common denominator 2*N1*N2 so the clamp is exact
    num = 2 * (n2 * N1 - n1 * N2)
    if continuity:
        cc = N1 + N2
        if num > 0:
            num = max(num - cc, 0)
        elif num < 0 and alternative == TWO_SIDED:
            num = min(num + cc, 0)
    return num / (2 * N1 * N2) / math.sqrt(var)


def two_proportion_test(n1, N1, n2, N2, alternative=TWO_SIDED, continuity=True):
    """p-value of the normal test for a difference in two proportions.

    Tests ``H0: pi2 - pi1 = 0`` from counts ``n1`` of ``N1`` and ``n2`` of
    ``N2``. ``alternative`` is ``"two-sided"`` or ``"greater"`` (``pi2 > pi1``).
    When the pooled proportion is 0 or 1 the variance vanishes; both samples
    are then identical in proportion and the p-value is 1.0.
    """
    if alternative not in (TWO_SIDED, GREATER):
        raise ValueError(f"unknown alternative {alternative!r}")
    z = two_proportion_z(n1, N1, n2, N2, alternative, continuity)
    if z is None:
        return 1.0
    if alternative == TWO_SIDED:
        return min(1.0, 2.0 * norm_cdf(-abs(z)))
    return norm_cdf(-z)


@dataclass(frozen=True)
class HolmResult:
    alpha: float
    p_values: tuple[float, ...]
    rejected: tuple[bool, ...]
    order: tuple[int, ...]
    adjusted_thresholds: tuple[float, ...]

    @property
    def num_rejected(self):
        return sum(self.rejected)

    @property
    def any_rejected(self):
        return any(self.rejected)


def holm_bonferroni(p_values, alpha=0.05):
    """Holm's step-down procedure at family-wise level ``alpha``.

    p-values are sorted ascending (ties keep their input order) and the r-th
    smallest, counting from 1, is compared with ``alpha / (K - r + 1)``.
    Rejection proceeds down the ladder and stops at the first failure.
    ``rejected`` is reported in input order; ``adjusted_thresholds`` follow
    the sorted order given by ``order``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha!r}")
    p = [float(v) for v in p_values]
    for v in p:
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"p-value out of range: {v!r}")
    K = len(p)
    order = sorted(range(K), key=lambda i: (p[i], i))
    thresholds = tuple(alpha / (K - r) for r in range(K))
    rejected = [False] * K
    for r, i in enumerate(order):
        if p[i] > thresholds[r]:
            break
        rejected[i] = True
    return HolmResult(alpha, tuple(p), tuple(rejected), tuple(order), thresholds)


def cohens_h(p1, p2):
    """Effect size ``arcsin(sqrt(p2)) - arcsin(sqrt(p1))``."""
    for v in (p1, p2):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"proportion out of range: {v!r}")
    return math.asin(math.sqrt(p2)) - math.asin(math.sqrt(p1))


def _log_comb(n, k):
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def hypergeom_sf(N, M, n, m):
    """Upper tail ``P(X >= m)`` for ``X ~ Hypergeometric(N, M, n)``.

    ``N`` is the population size, ``M`` the number of marked items, ``n`` the
    number of draws. The first term is evaluated with log-gamma and the rest
    by accumulating log term ratios, then summed with log-sum-exp.
    """
    for name, v in (("N", N), ("M", M), ("n", n), ("m", m)):
        if int(v) != v:
            raise ValueError(f"{name} must be an integer, got {v!r}")
    if not (0 <= M <= N and 0 <= n <= N and 0 <= m <= n):
        raise ValueError(f"invalid hypergeometric arguments N={N}, M={M}, n={n}, m={m}")
    lo = max(0, n - (N - M))
    hi = min(n, M)
    if m > hi:
        return 0.0
    if m <= lo:
        return 1.0
    log_first = _log_comb(M, m) + _log_comb(N - M, n - m) - _log_comb(N, n)
    k = np.arange(m, hi, dtype=np.float64)
    # log of P(k+1)/P(k)
    steps = np.log((M - k) * (n - k)) - np.log((k + 1) * (N - M - n + k + 1))
    logs = log_first + np.concatenate(([0.0], np.cumsum(steps)))
    top = logs.max()
    total = math.exp(top) * float(np.exp(logs - top).sum())
    return min(1.0, total)

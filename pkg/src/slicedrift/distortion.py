"""Drift injection: within-column permutations and odds-ratio rebalancing.

Permutation distortion rewrites the values of ``C`` feature columns on ``R``
rows by permuting them among those rows. Three settings control how the row
subset and its permutation are shared across the selected columns:

====  ==================  ======================
name  keep_rows_constant  repermute_each_column
====  ==================  ======================
E1    True                True
E2    True                False
E3    False               True
====  ==================  ======================

Rebalancing resamples a dataset's correct and misclassified strata so that
the misclassified-to-correct odds become ``k`` times the original.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._random import make_rng, round_half_away
from .data_model import NUMERIC
from .errors import DegenerateInputError, DistortionImpossibleError

FORCE_DIFFERENT_ATTEMPTS = 100

SETTINGS = {
    "E1": (True, True),
    "E2": (True, False),
    "E3": (False, True),
}


@dataclass(frozen=True)
class PermutationConfig:
    r: float
    c: float
    keep_rows_constant: bool = True
    repermute_each_column: bool = True
    force_different: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("r", "c"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must be in (0, 1], got {v!r}")

    @classmethod
    def for_setting(cls, setting, r, c, seed=0, force_different=True):
        keep, reperm = SETTINGS[setting]
        return cls(r, c, keep, reperm, force_different, seed)

    @property
    def setting(self):
        if not self.keep_rows_constant:
            return "E3"
        return "E1" if self.repermute_each_column else "E2"

    @property
    def is_pure_row_permutation(self):
        """E2 over every column only reorders whole records."""
        return self.keep_rows_constant and not self.repermute_each_column and self.c == 1.0


def num_rows(r, N):
    return max(1, round_half_away(r * N))


def num_columns(c, F):
    return max(1, round_half_away(c * F))


def apply_permutation(values, rows, sources):
    """Return a copy of ``values`` with ``out[rows[j]] = values[sources[j]]``."""
    out = values.copy()
    out[rows] = values[sources]
    return out


def _changed(before, after, numeric):
    if numeric:
        return not np.array_equal(before, after, equal_nan=True)
    return not np.array_equal(before, after)


def _is_constant(values, numeric):
    if numeric and np.isnan(values).any():
        return np.isnan(values).all()
    return bool((values == values[0]).all())


def _permute_until_changed(rng, rows, columns, d, force):
    """Draw a permutation of ``rows`` that changes every column in ``columns``."""
    blocks = [(name, d.columns[name][rows], d.schema.kind(name) == NUMERIC) for name in columns]
    if force:
        for name, block, numeric in blocks:
            if _is_constant(block, numeric):
                raise DistortionImpossibleError(name, 0)
    last = None
    for _ in range(FORCE_DIFFERENT_ATTEMPTS if force else 1):
        perm = rng.permutation(len(rows))
        last = next(
            (name for name, block, numeric in blocks if not _changed(block, block[perm], numeric)),
            None,
        )
        if last is None or not force:
            return rows[perm]
    raise DistortionImpossibleError(last, FORCE_DIFFERENT_ATTEMPTS)


def permute_distort(d, cfg):
    """Apply permutation distortion to ``d``; the indicator column is left untouched.

    ``R = max(1, round(r * N))`` rows and ``C = max(1, round(c * |F|))``
    columns are used, rounding halves away from zero. With
    ``force_different`` each permutation is redrawn, up to
    ``FORCE_DIFFERENT_ATTEMPTS`` times, until every column it is applied to
    changes in at least one row.
    """
    N = d.N
    names = d.schema.names
    if N < 2:
        raise DegenerateInputError(f"permutation distortion needs N >= 2, got {N}")
    R = num_rows(cfg.r, N)
    C = num_columns(cfg.c, len(names))
    rng = make_rng(cfg.seed)
    picked = [names[i] for i in sorted(rng.choice(len(names), size=C, replace=False))]

    new_cols = {}
    if cfg.keep_rows_constant:
        rows = np.sort(rng.choice(N, size=R, replace=False))
        if cfg.repermute_each_column:
            for name in picked:
                src = _permute_until_changed(rng, rows, [name], d, cfg.force_different)
                new_cols[name] = apply_permutation(d.columns[name], rows, src)
        else:
            src = _permute_until_changed(rng, rows, picked, d, cfg.force_different)
            for name in picked:
                new_cols[name] = apply_permutation(d.columns[name], rows, src)
    else:
        for name in picked:
            rows = np.sort(rng.choice(N, size=R, replace=False))
            src = _permute_until_changed(rng, rows, [name], d, cfg.force_different)
            new_cols[name] = apply_permutation(d.columns[name], rows, src)
    return d.replace(columns=new_cols)


def _check_odds_inputs(M2, N2, k):
    if k <= 0:
        raise ValueError(f"multiplier k must be positive, got {k!r}")
    if not 0 <= M2 <= N2 or N2 < 1:
        raise ValueError(f"need 0 <= M2 <= N2 and N2 >= 1, got M2={M2}, N2={N2}")
    if M2 == N2:
        raise DegenerateInputError("every row is misclassified; the odds are infinite")


def target_misclassified(M2, N2, k):
    """Misclassified count whose odds are ``k`` times those of ``M2`` out of ``N2``.

    ``max(min(round(k*M2*N2 / (N2 - (1-k)*M2)), N2), 0)``, evaluated exactly
    and rounded half away from zero.
    """
    _check_odds_inputs(M2, N2, k)
    if M2 == 0:
        if k > 1:
            warnings.warn("M2 = 0: no misclassified rows to amplify", RuntimeWarning, stacklevel=2)
        return 0
    kk = Fraction(k)
    value = kk * M2 * N2 / (N2 - (1 - kk) * M2)
    return max(min(round_half_away(value), N2), 0)


def multiplier_to_mcr(M, N, k):
    """Misclassification rate ``k*phi / (1 + k*phi)`` with odds ``phi = M / (N - M)``."""
    _check_odds_inputs(M, N, k)
    phi = M / (N - M)
    return k * phi / (1.0 + k * phi)


@dataclass(frozen=True)
class RebalanceConfig:
    k: float
    seed: int = 0

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError(f"k must be positive, got {self.k!r}")


def rebalance_mcr(d, cfg):
    """Resample ``d`` to ``N`` rows with ``target_misclassified(M, N, k)`` misclassified ones.

    Misclassified and correct rows are drawn uniformly with replacement from
    their own strata; the output lists the misclassified draws first.
    """
    theta = d.require_theta()
    N, M = d.N, int(theta.sum())
    if M == 0 or M == N:
        raise DegenerateInputError(f"rebalancing needs both strata non-empty, got M={M}, N={N}")
    target = target_misclassified(M, N, cfg.k)
    bad = np.flatnonzero(theta)
    good = np.flatnonzero(~theta)
    rng = make_rng(cfg.seed)
    rows = np.concatenate(
        [bad[rng.integers(0, len(bad), size=target)], good[rng.integers(0, len(good), size=N - target)]]
    )
    return d.take(rows)

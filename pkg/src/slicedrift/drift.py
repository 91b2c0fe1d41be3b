"""Drift verdicts from changes in the relative size of weak slices.

Each baseline slice is mapped onto the deployment data (its indicator column
is never read) and its relative size ``n2 / N2`` is compared with the
baseline ``n1 / N1`` by a two-proportion test. The per-slice p-values are
pooled with Holm-Bonferroni and drift is declared when any slice is rejected.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

from .data_model import CATEGORICAL
from .errors import EmptySliceSetError, SchemaError
from .stats import GREATER, TWO_SIDED, cohens_h, holm_bonferroni, two_proportion_test

REPORT_VERSION = 1

DISTRIBUTION_CHANGE = "distribution_change"
MCR_DEGRADATION = "mcr_degradation"

_ALTERNATIVE = {DISTRIBUTION_CHANGE: TWO_SIDED, MCR_DEGRADATION: GREATER}


@dataclass(frozen=True)
class SliceTest:
    rule_id: str
    n1: int
    N1: int
    n2: int
    N2: int
    p_value: float
    cohens_h: float
    holm_rejected: bool

    @property
    def pi_hat1(self):
        return self.n1 / self.N1

    @property
    def pi_hat2(self):
        return self.n2 / self.N2

    def to_dict(self):
        return {
            "rule_id": self.rule_id,
            "n1": self.n1,
            "N1": self.N1,
            "n2": self.n2,
            "N2": self.N2,
            "pi_hat1": self.pi_hat1,
            "pi_hat2": self.pi_hat2,
            "p_value": self.p_value,
            "cohens_h": self.cohens_h,
            "holm_rejected": self.holm_rejected,
        }


@dataclass(frozen=True)
class DriftReport:
    goal: str
    alpha: float
    continuity: bool
    per_slice: tuple[SliceTest, ...]

    @property
    def K(self):
        return len(self.per_slice)

    @property
    def num_rejected(self):
        return sum(t.holm_rejected for t in self.per_slice)

    @property
    def drift_detected(self):
        return self.num_rejected > 0

    @property
    def p_values(self):
        return [t.p_value for t in self.per_slice]

    def detected_at(self, alpha):
        """Verdict the same p-values would give at another level ``alpha``."""
        return holm_bonferroni(self.p_values, alpha).any_rejected

    def at_alpha(self, alpha):
        holm = holm_bonferroni(self.p_values, alpha)
        tests = tuple(
            SliceTest(**{**t.__dict__, "holm_rejected": r}) for t, r in zip(self.per_slice, holm.rejected)
        )
        return DriftReport(self.goal, alpha, self.continuity, tests)

    def summary_line(self):
        return f"DRIFT goal={self.goal} alpha={self.alpha:g} rejected={self.num_rejected}/{self.K}"

    def to_dict(self):
        return {
            "report_version": REPORT_VERSION,
            "goal": self.goal,
            "alternative": _ALTERNATIVE[self.goal],
            "alpha": self.alpha,
            "continuity": self.continuity,
            "drift_detected": self.drift_detected,
            "num_rejected": self.num_rejected,
            "K": self.K,
            "per_slice": [t.to_dict() for t in self.per_slice],
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, obj):
        tests = tuple(
            SliceTest(
                rule_id=t["rule_id"],
                n1=t["n1"],
                N1=t["N1"],
                n2=t["n2"],
                N2=t["N2"],
                p_value=t["p_value"],
                cohens_h=t["cohens_h"],
                holm_rejected=t["holm_rejected"],
            )
            for t in obj["per_slice"]
        )
        return cls(obj["goal"], obj["alpha"], obj["continuity"], tests)


def check_compatible(slices, d2):
    """Raise :class:`SchemaError` unless ``d2`` can host every rule of ``slices``.

    Category codes must agree: the slice set's label table for each
    categorical feature has to be a prefix of the deployment table.
    """
    for rule in slices.rules:
        rule.check_schema(d2.schema)
    if slices.schema is None:
        return
    used = {f for rule in slices.rules for f in rule.features}
    for name in sorted(used):
        if slices.schema.kind(name) != CATEGORICAL:
            continue
        base = slices.schema.categories.get(name, ())
        dep = d2.schema.categories.get(name, ())
        if tuple(dep[: len(base)]) != tuple(base):
            raise SchemaError(f"category codes for {name!r} differ between baseline and deployment")


def slice_sizes(slices, d2):
    """Support of every rule on ``d2``; shared constraints are evaluated once."""
    cache = {}
    sizes = []
    for rule in slices.rules:
        mask = None
        for c in rule.constraints:
            cm = cache.get(c)
            if cm is None:
                cm = cache[c] = c.mask(d2)
            mask = cm if mask is None else mask & cm
        sizes.append(int(mask.sum()))
    return sizes


def detect_drift(slices, d2, goal=DISTRIBUTION_CHANGE, alpha=0.05, continuity=True):
    """Test every slice of ``slices`` for a change in relative size on ``d2``.

    ``goal="distribution_change"`` uses two-sided tests; ``"mcr_degradation"``
    tests only for slice growth. Slices are reported in rule-id order.
    """
    if goal not in _ALTERNATIVE:
        raise ValueError(f"unknown goal {goal!r}")
    if slices.K == 0:
        raise EmptySliceSetError("slice set has no rules")
    check_compatible(slices, d2)
    alternative = _ALTERNATIVE[goal]
    N1, N2 = slices.N, d2.N
    rows = []
    for base, n2 in zip(slices.baseline_stats, slice_sizes(slices, d2)):
        p = two_proportion_test(base.n, N1, n2, N2, alternative=alternative, continuity=continuity)
        h = cohens_h(base.n / N1, n2 / N2)
        rows.append((base.rule.id, base.n, n2, p, h))
    rows.sort(key=lambda r: r[0])
    holm = holm_bonferroni([r[3] for r in rows], alpha)
    tests = tuple(
        SliceTest(rid, n1, N1, n2, N2, p, h, rej)
        for (rid, n1, n2, p, h), rej in zip(rows, holm.rejected)
    )
    return DriftReport(goal, alpha, continuity, tests)

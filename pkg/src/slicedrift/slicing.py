"""Weak data slices: rule representation, mapping, discovery and summaries.

A slice rule is a conjunction of per-feature constraints: closed numeric
intervals or sets of category codes. A rule is *weak* on a dataset when the
rows it matches are misclassified more often than the dataset overall, and
significantly so under a one-sided hypergeometric test.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .data_model import CATEGORICAL, NUMERIC, FeatureSchema
from .errors import DegenerateInputError, NoErrorsError, SchemaError
from .stats import hypergeom_sf

FORMAT_VERSION = 1


def _fmt_num(x):
    return repr(float(x))


@dataclass(frozen=True)
class Constraint:
    """One feature's constraint: ``interval=(lo, hi)`` for numeric, ``values`` for categorical."""

    feature: str
    interval: tuple[float, float] | None = None
    values: frozenset[int] | None = None

    def __post_init__(self):
        if (self.interval is None) == (self.values is None):
            raise ValueError("a constraint has exactly one of interval or values")
        if self.interval is not None:
            lo, hi = (float(v) for v in self.interval)
            if math.isnan(lo) or math.isnan(hi) or lo > hi:
                raise ValueError(f"invalid interval [{lo}, {hi}] on {self.feature!r}")
            object.__setattr__(self, "interval", (lo, hi))
        else:
            vals = frozenset(int(v) for v in self.values)
            if not vals or min(vals) < 0:
                raise ValueError(f"value set on {self.feature!r} must be non-empty category codes")
            object.__setattr__(self, "values", vals)

    @property
    def kind(self):
        return NUMERIC if self.interval is not None else CATEGORICAL

    def label(self):
        if self.interval is not None:
            lo, hi = self.interval
            return f"{self.feature} in [{_fmt_num(lo)}, {_fmt_num(hi)}]"
        return f"{self.feature} in {{{', '.join(str(v) for v in sorted(self.values))}}}"

    def mask(self, d):
        col = d.columns[self.feature]
        if self.interval is not None:
            lo, hi = self.interval
            # NaN compares false, so missing values never match
            return (col >= lo) & (col <= hi)
        return np.isin(col, np.fromiter(self.values, dtype=np.int64))

    def to_dict(self):
        if self.interval is not None:
            return {"feature": self.feature, "interval": list(self.interval)}
        return {"feature": self.feature, "values": sorted(self.values)}

    @classmethod
    def from_dict(cls, obj):
        if "interval" in obj:
            return cls(obj["feature"], interval=tuple(obj["interval"]))
        return cls(obj["feature"], values=frozenset(obj["values"]))


@dataclass(frozen=True)
class SliceRule:
    constraints: tuple[Constraint, ...]
    id: str = ""

    def __post_init__(self):
        cons = tuple(sorted(self.constraints, key=lambda c: c.feature))
        if not cons:
            raise ValueError("a slice rule needs at least one constraint")
        feats = [c.feature for c in cons]
        if len(set(feats)) != len(feats):
            raise ValueError(f"repeated feature in rule: {feats}")
        object.__setattr__(self, "constraints", cons)
        if not self.id:
            object.__setattr__(self, "id", " & ".join(c.label() for c in cons))

    @property
    def order(self):
        return len(self.constraints)

    @property
    def features(self):
        return [c.feature for c in self.constraints]

    def check_schema(self, schema):
        for c in self.constraints:
            if not schema.has(c.feature):
                raise SchemaError(f"rule {self.id!r}: unknown feature {c.feature!r}")
            if schema.kind(c.feature) != c.kind:
                raise SchemaError(
                    f"rule {self.id!r}: feature {c.feature!r} is {schema.kind(c.feature)}, "
                    f"constraint is {c.kind}"
                )

    def mask(self, d):
        self.check_schema(d.schema)
        out = np.ones(d.N, dtype=bool)
        for c in self.constraints:
            out &= c.mask(d)
        return out

    def to_dict(self):
        return {"id": self.id, "constraints": [c.to_dict() for c in self.constraints]}

    @classmethod
    def from_dict(cls, obj):
        return cls(tuple(Constraint.from_dict(c) for c in obj["constraints"]), id=obj.get("id", ""))


@dataclass(frozen=True)
class MappedSlice:
    """A rule's footprint on a dataset: support ``n`` and, if labels were used, error count ``m``."""

    rule: SliceRule
    n: int
    N: int
    m: int | None = None

    @property
    def pi_hat(self):
        return self.n / self.N if self.N else 0.0

    @property
    def mcr(self):
        if self.m is None or self.n == 0:
            return None
        return self.m / self.n


def map_slice(rule, d, use_theta=True):
    """Count the rows of ``d`` matching every constraint of ``rule``.

    ``m`` is filled in only when ``use_theta`` is set and ``d`` carries an
    indicator; with ``use_theta=False`` the indicator is never read.
    """
    mask = rule.mask(d)
    n = int(mask.sum())
    m = int(d.theta[mask].sum()) if use_theta and d.has_theta else None
    return MappedSlice(rule, n, d.N, m)


@dataclass(frozen=True)
class SliceFinderConfig:
    """Slice-finder settings.

    ``min_support=None`` means ``max(20, ceil(0.005 * N))``. Numeric features
    are cut at ``n_bins`` quantiles and intervals are runs of at most
    ``max_bin_run`` adjacent bins.
    """

    min_support: int | None = None
    filter_alpha: float = 0.05
    max_order: int = 2
    n_bins: int = 10
    max_bin_run: int = 4

    def support_for(self, N):
        if self.min_support is not None:
            return int(self.min_support)
        return max(20, math.ceil(0.005 * N))


@dataclass
class SliceSet:
    rules: list[SliceRule]
    source: str
    N: int
    M: int
    baseline_stats: list[MappedSlice]
    schema: FeatureSchema | None = None
    config: SliceFinderConfig = field(default_factory=SliceFinderConfig)

    @property
    def K(self):
        return len(self.rules)

    def to_dict(self):
        return {
            "format_version": FORMAT_VERSION,
            "source": self.source,
            "N": self.N,
            "M": self.M,
            "schema": None if self.schema is None else self.schema.to_dict(),
            "config": {
                "min_support": self.config.support_for(self.N),
                "filter_alpha": self.config.filter_alpha,
                "max_order": self.config.max_order,
                "n_bins": self.config.n_bins,
                "max_bin_run": self.config.max_bin_run,
            },
            "rules": [
                {**st.rule.to_dict(), "n": st.n, "m": st.m} for st in self.baseline_stats
            ],
        }

    @classmethod
    def from_dict(cls, obj):
        schema = FeatureSchema.from_dict(obj["schema"]) if obj.get("schema") else None
        config = SliceFinderConfig(**obj["config"]) if obj.get("config") else SliceFinderConfig()
        N = int(obj["N"])
        rules, stats = [], []
        for r in obj["rules"]:
            rule = SliceRule.from_dict(r)
            rules.append(rule)
            stats.append(MappedSlice(rule, int(r["n"]), N, None if r.get("m") is None else int(r["m"])))
        return cls(rules, obj.get("source", ""), N, int(obj["M"]), stats, schema, config)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


# -- candidate generation -------------------------------------------------


def _numeric_candidates(name, col, n_bins, max_run):
    ok = ~np.isnan(col)
    vals = col[ok]
    if len(vals) == 0:
        return []
    edges = np.unique(np.quantile(vals, np.linspace(0.0, 1.0, n_bins + 1)[1:-1]))
    bins = np.searchsorted(edges, col, side="right")
    n_actual = len(edges) + 1
    lo_of = np.full(n_actual, np.inf)
    hi_of = np.full(n_actual, -np.inf)
    np.minimum.at(lo_of, bins[ok], vals)
    np.maximum.at(hi_of, bins[ok], vals)
    occupied = [b for b in range(n_actual) if np.isfinite(lo_of[b])]
    out = []
    for i, a in enumerate(occupied):
        for b in occupied[i : i + max_run]:
            c = Constraint(name, interval=(lo_of[a], hi_of[b]))
            out.append((c, ok & (bins >= a) & (bins <= b)))
    return out


def _categorical_candidates(name, col, theta, overall_mcr):
    present = np.unique(col[col >= 0])
    out = []
    weak_values = []
    for v in present.tolist():
        mask = col == v
        out.append((Constraint(name, values=frozenset([v])), mask))
        if theta[mask].mean() > overall_mcr:
            weak_values.append(v)
    if len(weak_values) >= 2:
        c = Constraint(name, values=frozenset(weak_values))
        out.append((c, np.isin(col, weak_values)))
    return out


def _one_way_candidates(d, cfg, min_support):
    theta = d.theta
    overall = d.M / d.N
    per_feature = {}
    for f in d.schema.features:
        col = d.columns[f.name]
        if f.kind == NUMERIC:
            cands = _numeric_candidates(f.name, col, cfg.n_bins, cfg.max_bin_run)
        else:
            cands = _categorical_candidates(f.name, col, theta, overall)
        # a constraint matching every row carries no information
        kept = [(c, m) for c, m in cands if min_support <= m.sum() < d.N]
        if kept:
            per_feature[f.name] = kept
    return per_feature


def _is_weak(n, m, N, M, min_support, alpha):
    if n < min_support or m * N <= M * n:
        return False
    return hypergeom_sf(N, M, n, m) < alpha


def find_weak_slices(d, config=None, source=None):
    """Find weak 1- and 2-feature slices of ``d``.

    Candidates are numeric intervals over runs of adjacent quantile bins,
    single category values, and the union of all categories whose error rate
    exceeds the overall rate. Two-feature candidates are conjunctions of
    one-feature candidates that meet the support threshold. A candidate is
    kept when its support reaches ``min_support``, its error rate exceeds the
    overall rate, and the hypergeometric upper tail ``P(X >= m)`` is below
    ``filter_alpha``. Rules matching identical row sets are collapsed to the
    one with the smallest id. Output is sorted by rule id.
    """
    cfg = config or SliceFinderConfig()
    if cfg.max_order not in (1, 2):
        raise ValueError(f"max_order must be 1 or 2, got {cfg.max_order}")
    theta = d.require_theta()
    N, M = d.N, int(theta.sum())
    if M == 0:
        raise NoErrorsError("no misclassified rows; weak slices are undefined")
    min_support = cfg.support_for(N)
    if N < min_support:
        raise DegenerateInputError(f"N={N} is below the minimum slice support {min_support}")
    alpha = cfg.filter_alpha

    found = []  # (rule, mask, n, m)
    per_feature = {}
    for name, cands in _one_way_candidates(d, cfg, min_support).items():
        survivors = []
        for c, mask in cands:
            n, m = int(mask.sum()), int(theta[mask].sum())
            if _is_weak(n, m, N, M, min_support, alpha):
                found.append((SliceRule((c,)), mask, n, m))
                survivors.append((c, mask))
        if survivors:
            per_feature[name] = survivors

    if cfg.max_order >= 2:
        theta_f = theta.astype(np.float32)
        feats = list(per_feature)
        stacks = {
            f: np.stack([m for _, m in per_feature[f]]).astype(np.float32) for f in feats
        }
        for fa, fb in combinations(feats, 2):
            A, B = stacks[fa], stacks[fb]
            n_mat = A @ B.T
            m_mat = (A * theta_f) @ B.T
            # float32 sums of 0/1 are exact below 2**24 rows
            n_mat = np.rint(n_mat).astype(np.int64)
            m_mat = np.rint(m_mat).astype(np.int64)
            cand = (n_mat >= min_support) & (m_mat * N > M * n_mat)
            for i, j in zip(*np.nonzero(cand)):
                n, m = int(n_mat[i, j]), int(m_mat[i, j])
                if hypergeom_sf(N, M, n, m) >= alpha:
                    continue
                ca, ma = per_feature[fa][i]
                cb, mb = per_feature[fb][j]
                found.append((SliceRule((ca, cb)), ma & mb, n, m))

    best = {}
    for rule, mask, n, m in found:
        key = np.packbits(mask).tobytes()
        prev = best.get(key)
        if prev is None or rule.id < prev[0].id:
            best[key] = (rule, n, m)
    kept = sorted(best.values(), key=lambda t: t[0].id)

    rules = [r for r, _, _ in kept]
    stats = [MappedSlice(r, n, N, m) for r, n, m in kept]
    return SliceSet(
        rules=rules,
        source=d.name if source is None else source,
        N=N,
        M=M,
        baseline_stats=stats,
        schema=d.schema,
        config=cfg,
    )


@dataclass(frozen=True)
class SliceSummary:
    num_slices: int
    pct_1feat: float
    pct_2feat: float
    pct_error_coverage: float
    pct_features_in_any_slice: float
    pct_features_in_1feat_slice: float
    pct_features_in_2feat_slice: float

    def as_dict(self):
        return dict(self.__dict__)


def slice_summary(s, d):
    """Summary statistics of a slice set mapped onto ``d``, as percentages in [0, 100]."""
    theta = d.require_theta()
    M = int(theta.sum())
    if M == 0:
        raise NoErrorsError("error coverage is undefined without misclassified rows")
    K = s.K
    covered = np.zeros(d.N, dtype=bool)
    feats_any, feats_1, feats_2 = set(), set(), set()
    n1 = n2 = 0
    for rule in s.rules:
        covered |= rule.mask(d)
        feats_any.update(rule.features)
        if rule.order == 1:
            n1 += 1
            feats_1.update(rule.features)
        elif rule.order == 2:
            n2 += 1
            feats_2.update(rule.features)
    F = len(d.schema.features)

    def pct(a, b):
        return 100.0 * a / b if b else 0.0

    return SliceSummary(
        num_slices=K,
        pct_1feat=pct(n1, K),
        pct_2feat=pct(n2, K),
        pct_error_coverage=pct(int((covered & theta).sum()), M),
        pct_features_in_any_slice=pct(len(feats_any), F),
        pct_features_in_1feat_slice=pct(len(feats_1), F),
        pct_features_in_2feat_slice=pct(len(feats_2), F),
    )

"""Acceptance criteria 1 to 8, each reported as one PASS/FAIL line in the terminal summary.

All randomness is fixed: master seed 0 and the 10,000-row synthetic dataset
drawn with seed 0.
"""
import math
import time
from collections import Counter
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from slicedrift._random import derive_seed
from slicedrift.data_model import (
    CATEGORICAL,
    NUMERIC,
    Dataset,
    Feature,
    FeatureSchema,
    stratified_split,
)
from slicedrift.distortion import (
    PermutationConfig,
    multiplier_to_mcr,
    num_columns,
    num_rows,
    permute_distort,
    target_misclassified,
)
from slicedrift.drift import DISTRIBUTION_CHANGE, MCR_DEGRADATION, detect_drift
from slicedrift.errors import DistortionImpossibleError
from slicedrift.harness import (
    DEFAULT_GRID,
    Goal1ExperimentConfig,
    Goal2ExperimentConfig,
    run_goal1,
    run_goal2,
    split_seed,
)
from slicedrift.slicing import find_weak_slices, map_slice, slice_summary
from slicedrift.stats import cohens_h, holm_bonferroni, hypergeom_sf, two_proportion_test

MASTER_SEED = 0
REL = 1e-10

mpmath.mp.dps = 40


TINY = 2.2250738585072014e-308  # smallest normal double


def rel_err(got, want):
    # below the normal range a double cannot hold a relative precision, so the
    # error is scaled by the smallest normal number instead
    if isinstance(want, Fraction):
        want = mpmath.mpf(want.numerator) / want.denominator
    got, want = mpmath.mpf(got), mpmath.mpf(want)
    return float(abs(got - want) / max(abs(want), TINY))


# -- criterion 1 -------------------------------------------------------------


def ref_two_proportion(n1, N1, n2, N2, alternative, continuity):
    n1, N1, n2, N2 = (mpmath.mpf(v) for v in (n1, N1, n2, N2))
    pooled = (n1 + n2) / (N1 + N2)
    var = pooled * (1 - pooled) * (1 / N1 + 1 / N2)
    if var == 0:
        return mpmath.mpf(1)
    diff = n2 / N2 - n1 / N1
    if continuity:
        cc = (1 / N1 + 1 / N2) / 2
        if diff > 0:
            diff = max(diff - cc, 0)
        elif diff < 0 and alternative == "two-sided":
            diff = min(diff + cc, 0)
    z = diff / mpmath.sqrt(var)
    if alternative == "two-sided":
        return min(mpmath.mpf(1), mpmath.erfc(abs(z) / mpmath.sqrt(2)))
    return mpmath.erfc(z / mpmath.sqrt(2)) / 2


def ref_holm(p, alpha):
    # adjusted p-values: running max of (K - rank) * p over the sorted list
    K = len(p)
    order = sorted(range(K), key=lambda i: p[i])
    rejected = [False] * K
    running = Fraction(0)
    for rank, i in enumerate(order):
        running = max(running, min(Fraction(1), (K - rank) * Fraction(p[i])))
        rejected[i] = running <= Fraction(alpha)
    return tuple(rejected)


def ref_hypergeom(N, M, n, m):
    # exact sum of C(M, k) C(N-M, n-k); both binomials are stepped with exact integer division
    # terms below n - (N - M) are zero
    start = max(m, n - (N - M))
    total = 0
    a, b = math.comb(M, start), math.comb(N - M, n - start)
    for k in range(start, min(n, M) + 1):
        total += a * b
        a = a * (M - k) // (k + 1)
        b = b * (n - k) // (N - M - n + k + 1)
    return Fraction(total, math.comb(N, n))


def test_criterion_1_statistical_oracles(report_criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(derive_seed(MASTER_SEED, "acceptance", 1))
    failures = Counter()
    counts = Counter()

    for _ in range(2000):
        N1, N2 = (int(v) for v in rng.integers(1, 500, size=2))
        n1, n2 = int(rng.integers(0, N1 + 1)), int(rng.integers(0, N2 + 1))
        alt = "two-sided" if rng.random() < 0.5 else "greater"
        cc = bool(rng.random() < 0.5)
        got = two_proportion_test(n1, N1, n2, N2, alternative=alt, continuity=cc)
        counts["two_proportion_test"] += 1
        if rel_err(got, ref_two_proportion(n1, N1, n2, N2, alt, cc)) > REL:
            failures["two_proportion_test"] += 1

    for _ in range(2000):
        p1, p2 = rng.random(2)
        got = cohens_h(float(p1), float(p2))
        want = mpmath.asin(mpmath.sqrt(mpmath.mpf(float(p2)))) - mpmath.asin(mpmath.sqrt(mpmath.mpf(float(p1))))
        counts["cohens_h"] += 1
        if rel_err(got, want) > REL:
            failures["cohens_h"] += 1

    for _ in range(2000):
        K = int(rng.integers(1, 40))
        alpha = float(rng.choice([0.01, 0.05, 0.1]))
        # mix of clear signals and noise so that rejections stop at varied ranks
        p = np.where(rng.random(K) < 0.3, rng.random(K) * alpha / K * 2, rng.random(K)).tolist()
        counts["holm_bonferroni"] += 1
        if holm_bonferroni(p, alpha).rejected != ref_holm(p, alpha):
            failures["holm_bonferroni"] += 1

    # exhaustive over every valid (N, M, n, m) with N <= 25
    for N in range(0, 26):
        for M in range(N + 1):
            for n in range(N + 1):
                for m in range(n + 1):
                    counts["hypergeom_sf"] += 1
                    if rel_err(hypergeom_sf(N, M, n, m), ref_hypergeom(N, M, n, m)) > REL:
                        failures["hypergeom_sf"] += 1
    for _ in range(1000):
        N = int(rng.integers(26, 3000))
        M, n = (int(v) for v in rng.integers(0, N + 1, size=2))
        m = int(rng.integers(0, n + 1))
        counts["hypergeom_sf"] += 1
        if rel_err(hypergeom_sf(N, M, n, m), ref_hypergeom(N, M, n, m)) > REL:
            failures["hypergeom_sf"] += 1

    elapsed = time.perf_counter() - start
    passed = not failures and elapsed < 60 and all(v >= 1000 for v in counts.values())
    detail = ", ".join(f"{k} {counts[k] - failures[k]}/{counts[k]}" for k in sorted(counts))
    report_criterion(1, passed, f"oracle matches at rel {REL:g}: {detail}; {elapsed:.1f}s")
    assert not failures, dict(failures)
    assert elapsed < 60


# -- criterion 2 -------------------------------------------------------------


def test_criterion_2_false_positive_control(report_criterion, synthetic_10k):
    start = time.perf_counter()
    detected = 0
    for b in range(200):
        pair = stratified_split(synthetic_10k, split_seed(MASTER_SEED, b), split_index=b)
        slices = find_weak_slices(pair.baseline)
        detected += detect_drift(slices, pair.deployment, DISTRIBUTION_CHANGE, 0.05).drift_detected
    elapsed = time.perf_counter() - start
    frac = detected / 200
    bound = 0.05 + 3 * math.sqrt(0.05 * 0.95 / 200)
    passed = frac <= bound and elapsed < 600
    report_criterion(2, passed, f"pure-split detection {detected}/200 = {frac:.3f} (bound {bound:.3f}); {elapsed:.1f}s")
    assert frac <= bound
    assert elapsed < 600


# -- criterion 3 -------------------------------------------------------------


def test_criterion_3_goal1_ordering(report_criterion, synthetic_10k):
    start = time.perf_counter()
    cfg = Goal1ExperimentConfig(num_splits_total=50, num_splits_selected=3, num_resamples=3,
                                master_seed=MASTER_SEED)
    grid = run_goal1(cfg, synthetic_10k)
    elapsed = time.perf_counter() - start
    cs = [c for c in DEFAULT_GRID if c >= 0.25]
    rs = sorted(DEFAULT_GRID)

    def f(s, c, r):
        return grid.fraction(setting=s, c=c, r=r, alpha=0.05)

    order_inv = []
    for c in cs:
        for r in rs:
            for hi, lo in (("E3", "E1"), ("E1", "E2")):
                gap = f(lo, c, r) - f(hi, c, r)
                if gap > 0:
                    order_inv.append((hi, lo, c, r, round(gap, 3)))
    order_ok = len(order_inv) <= 2 and all(g <= 0.15 for *_, g in order_inv)

    panel_inv = {}
    for s in ("E1", "E2", "E3"):
        for c in cs:
            drops = [round(f(s, c, a) - f(s, c, b), 3) for a, b in zip(rs, rs[1:]) if f(s, c, b) < f(s, c, a)]
            if drops:
                panel_inv[(s, c)] = drops
    mono_ok = all(len(d) <= 1 and d[0] <= 0.15 for d in panel_inv.values())

    passed = order_ok and mono_ok and elapsed < 900 and not grid.skipped
    report_criterion(
        3, passed,
        f"setting-order inversions {order_inv or 'none'}; r-monotonicity inversions "
        f"{panel_inv or 'none'}; {elapsed:.1f}s",
    )
    assert not grid.skipped
    assert order_ok, order_inv
    assert mono_ok, panel_inv
    assert elapsed < 900


# -- criterion 4 -------------------------------------------------------------


def test_criterion_4_goal2_saturation(report_criterion, synthetic_10k):
    start = time.perf_counter()
    cfg = Goal2ExperimentConfig(num_splits=20, master_seed=MASTER_SEED)
    grid = run_goal2(cfg, synthetic_10k)
    elapsed = time.perf_counter() - start
    ks = sorted(cfg.multipliers)
    fr = [grid.fraction(k=k, alpha=0.05) for k in ks]
    null_ok = fr[0] <= 0.10
    sat_ok = all(v == 1.0 for k, v in zip(ks, fr) if k >= 5.0)
    drops = [round(a - b, 3) for a, b in zip(fr, fr[1:]) if b < a]
    mono_ok = len(drops) <= 1 and all(d <= 0.1 for d in drops)
    passed = null_ok and sat_ok and mono_ok and elapsed < 600 and not grid.skipped
    table = " ".join(f"k={k:g}:{v:.2f}" for k, v in zip(ks, fr))
    report_criterion(4, passed, f"MCR baseline {synthetic_10k.mcr:.3f}; {table}; {elapsed:.1f}s")
    assert not grid.skipped
    assert sat_ok and mono_ok, table
    assert null_ok, f"k=1 detection {fr[0]:.2f} exceeds 0.10"
    assert elapsed < 600


# -- criterion 5 -------------------------------------------------------------


def exact_target(M2, N2, k):
    k = Fraction(k)
    value = k * M2 * N2 / (N2 - (1 - k) * M2)
    rounded = math.floor(value + Fraction(1, 2))
    return max(min(rounded, N2), 0)


def test_criterion_5_rebalancing_arithmetic(report_criterion):
    rng = np.random.default_rng(derive_seed(MASTER_SEED, "acceptance", 5))
    problems = []
    if target_misclassified(1089, 7326, 2) != 1896:
        problems.append("worked case")
    # clamp branches: huge k pins to N2, tiny k pins to 0
    if target_misclassified(3, 4, 1e12) != 4 or target_misclassified(3, 400, 1e-12) != 0:
        problems.append("clamps")
    formula_checks = 0
    for _ in range(5000):
        N2 = int(rng.integers(2, 100_000))
        M2 = int(rng.integers(1, N2))
        k = float(rng.choice([0.1, 0.5, 1, 1.25, 1.5, 1.75, 2, 3, 5, 7.5, 10, 1000]))
        formula_checks += 1
        if target_misclassified(M2, N2, k) != exact_target(M2, N2, k):
            problems.append(("formula", M2, N2, k))
    agree_checks = 0
    for _ in range(50):
        N = int(rng.integers(2, 100_000))
        M = int(rng.integers(1, N))
        for k in range(1, 11):
            agree_checks += 1
            if abs(target_misclassified(M, N, k) - N * multiplier_to_mcr(M, N, k)) > 1:
                problems.append(("agree", M, N, k))
    report_criterion(
        5, not problems,
        f"worked case 1896, clamps, {formula_checks} exact-formula and {agree_checks} agreement checks; "
        f"problems {problems[:3] or 'none'}",
    )
    assert not problems


# -- criterion 6 -------------------------------------------------------------


def random_dataset(rng):
    N = int(rng.integers(2, 25))
    F = int(rng.integers(1, 6))
    features, cols, cats = [], {}, {}
    for j in range(F):
        name = f"f{j}"
        levels = int(rng.integers(1, 4))
        if rng.random() < 0.5:
            features.append(Feature(name, NUMERIC))
            col = rng.integers(0, levels, size=N).astype(float)
            col[rng.random(N) < 0.1] = np.nan
        else:
            features.append(Feature(name, CATEGORICAL))
            cats[name] = tuple("abc"[:levels])
            col = rng.integers(-1, levels, size=N)
        cols[name] = col
    theta = rng.random(N) < 0.3
    return Dataset(FeatureSchema(tuple(features), "wrong", cats), cols, theta)


def same(a, b, numeric):
    return np.array_equal(a, b, equal_nan=True) if numeric else np.array_equal(a, b)


def multiset(col):
    return Counter("nan" if isinstance(v, float) and math.isnan(v) else v for v in col.tolist())


def test_criterion_6_permutation_invariants(report_criterion):
    rng = np.random.default_rng(derive_seed(MASTER_SEED, "acceptance", 6))
    problems = []
    raised = 0
    for i in range(10_000):
        d = random_dataset(rng)
        setting = ("E1", "E2", "E3")[i % 3]
        force = bool(rng.random() < 0.8)
        cfg = PermutationConfig.for_setting(setting, float(rng.uniform(0.01, 1)), float(rng.uniform(0.01, 1)),
                                            seed=int(rng.integers(2**62)), force_different=force)
        try:
            out = permute_distort(d, cfg)
        except DistortionImpossibleError:
            if not force:
                problems.append((i, "raised without force_different"))
            raised += 1
            continue
        if not np.array_equal(out.theta, d.theta):
            problems.append((i, "theta"))
        changed = []
        for f in d.schema.features:
            a, b = d.columns[f.name], out.columns[f.name]
            if multiset(a) != multiset(b):
                problems.append((i, "multiset", f.name))
            if not same(a, b, f.kind == NUMERIC):
                changed.append(f.name)
        C = num_columns(cfg.c, len(d.schema.features))
        if len(changed) > C:
            problems.append((i, "unselected column changed"))
        if force and len(changed) != C:
            problems.append((i, "force_different left a selected column unchanged"))
        rows_changed = np.zeros(d.N, bool)
        for name in changed:
            a, b = d.columns[name], out.columns[name]
            rows_changed |= ~((a == b) | (np.isnan(a) & np.isnan(b))) if d.schema.kind(name) == NUMERIC else a != b
        if setting != "E3" and rows_changed.sum() > num_rows(cfg.r, d.N):
            problems.append((i, "more rows changed than R"))
        if setting == "E2" and changed:
            before = Counter(zip(*(multiset_key(d.columns[n]) for n in changed)))
            after = Counter(zip(*(multiset_key(out.columns[n]) for n in changed)))
            if before != after:
                problems.append((i, "E2 row tuples"))
    report_criterion(
        6, not problems,
        f"10000 calls ({raised} raised the documented error); violations {problems[:3] or 'none'}",
    )
    assert not problems


def multiset_key(col):
    return ["nan" if isinstance(v, float) and math.isnan(v) else v for v in col.tolist()]


# -- criterion 7 -------------------------------------------------------------


def test_criterion_7_slice_contract(report_criterion, synthetic_10k):
    problems = []
    coverages = []
    for b in range(50):
        base = stratified_split(synthetic_10k, split_seed(MASTER_SEED, b), split_index=b).baseline
        s = find_weak_slices(base)
        alpha = s.config.filter_alpha
        for rule in s.rules:
            ms = map_slice(rule, base)
            if not ms.m * base.N > base.M * ms.n:
                problems.append((b, rule.id, "not weaker"))
            if not hypergeom_sf(base.N, base.M, ms.n, ms.m) < alpha:
                problems.append((b, rule.id, "not significant"))
        coverages.append(slice_summary(s, base).pct_error_coverage / 100)
    low = min(coverages)
    passed = not problems and low >= 0.85
    report_criterion(
        7, passed,
        f"50 baselines re-verified, violations {len(problems)}; error coverage min {low:.3f} "
        f"mean {np.mean(coverages):.3f}",
    )
    assert not problems, problems[:5]
    assert low >= 0.85


# -- criterion 8 -------------------------------------------------------------


def test_criterion_8_label_freeness(report_criterion, synthetic_small):
    rng = np.random.default_rng(derive_seed(MASTER_SEED, "acceptance", 8))
    slice_sets = {}
    mismatches = 0
    for case in range(100):
        b = int(rng.integers(0, 10))
        if b not in slice_sets:
            pair = stratified_split(synthetic_small, split_seed(MASTER_SEED, b), split_index=b)
            slice_sets[b] = (pair, find_weak_slices(pair.baseline))
        pair, s = slice_sets[b]
        d2 = pair.deployment
        goal = (DISTRIBUTION_CHANGE, MCR_DEGRADATION)[case % 2]
        alpha = float(rng.choice([0.01, 0.05, 0.1]))
        kind = case % 4
        if kind == 0:
            other = d2.replace(theta=rng.random(d2.N) < rng.random())
        elif kind == 1:
            other = d2.replace(theta=~d2.theta)
        elif kind == 2:
            other = d2.replace(theta=np.full(d2.N, bool(rng.random() < 0.5)))
        else:
            other = d2.without_theta()
        a = detect_drift(s, d2, goal, alpha)
        c = detect_drift(s, other, goal, alpha)
        if a.to_json() != c.to_json():
            mismatches += 1
    report_criterion(8, mismatches == 0, f"100 randomized indicator replacements, {mismatches} differing reports")
    assert mismatches == 0

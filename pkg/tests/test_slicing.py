import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slicedrift.data_model import stratified_split
from slicedrift.errors import DegenerateInputError, NoErrorsError, SchemaError
from slicedrift.slicing import (
    Constraint,
    MappedSlice,
    SliceFinderConfig,
    SliceRule,
    SliceSet,
    find_weak_slices,
    map_slice,
    slice_summary,
)
from slicedrift.stats import hypergeom_sf

from conftest import toy_dataset


def test_interval_mapping_toy():
    d = toy_dataset([1, 2, 3, 4, 5], theta=[False, True, False, True, False])
    ms = map_slice(SliceRule((Constraint("x", interval=(2, 4)),)), d)
    assert (ms.n, ms.m, ms.N) == (3, 2, 5)
    assert ms.pi_hat == pytest.approx(0.6)
    assert ms.mcr == pytest.approx(2 / 3)


def test_universal_interval_covers_all():
    d = toy_dataset([1, 2, 3, 4, 5], theta=[False] * 5)
    assert map_slice(SliceRule((Constraint("x", interval=(-np.inf, np.inf)),)), d).n == 5


def test_missing_values_never_match():
    d = toy_dataset([1.0, np.nan, 3.0], cat=[0, -1, 1])
    assert map_slice(SliceRule((Constraint("x", interval=(-np.inf, np.inf)),)), d).n == 2
    assert map_slice(SliceRule((Constraint("g", values={0, 1, 2}),)), d).n == 2


def test_conjunction_shrinks_support():
    d = toy_dataset([1, 2, 3, 4, 5, 6], cat=[0, 1, 0, 1, 0, 2])
    base = SliceRule((Constraint("x", interval=(2, 5)),))
    both = SliceRule((Constraint("x", interval=(2, 5)), Constraint("g", values={1})))
    assert map_slice(both, d).n == 2 <= map_slice(base, d).n == 4


def test_mapping_without_labels():
    d = toy_dataset([1, 2, 3])
    ms = map_slice(SliceRule((Constraint("x", interval=(1, 2)),)), d)
    assert ms.n == 2 and ms.m is None
    labelled = toy_dataset([1, 2, 3], theta=[True, True, False])
    assert map_slice(SliceRule((Constraint("x", interval=(1, 2)),)), labelled, use_theta=False).m is None


def test_rule_ids_and_order():
    rule = SliceRule((Constraint("x", interval=(2, 4)), Constraint("g", values={1, 0})))
    assert rule.id == "g in {0, 1} & x in [2.0, 4.0]"
    assert rule.order == 2 and rule.features == ["g", "x"]


@pytest.mark.parametrize("build", [
    lambda: Constraint("x"),
    lambda: Constraint("x", interval=(3, 1)),
    lambda: Constraint("x", interval=(np.nan, 1)),
    lambda: Constraint("g", values=set()),
    lambda: SliceRule(()),
    lambda: SliceRule((Constraint("x", interval=(0, 1)), Constraint("x", interval=(2, 3)))),
])
def test_invalid_rules(build):
    with pytest.raises(ValueError):
        build()


def test_schema_mismatch_on_mapping():
    d = toy_dataset([1, 2], cat=[0, 1])
    with pytest.raises(SchemaError):
        map_slice(SliceRule((Constraint("z", interval=(0, 1)),)), d)
    with pytest.raises(SchemaError):
        map_slice(SliceRule((Constraint("x", values={0}),)), d)


def test_theta_threshold_case():
    # errors concentrated above 0.9 on a uniform feature
    rng = np.random.default_rng(1)
    x = rng.random(2000)
    d = toy_dataset(x, theta=x > 0.9)
    s = find_weak_slices(d, SliceFinderConfig(max_order=1))
    assert s.K >= 1
    assert slice_summary(s, d).pct_error_coverage == 100.0
    top = max(s.baseline_stats, key=lambda ms: ms.m / ms.n)
    lo, hi = top.rule.constraints[0].interval
    # the sharpest slice is the top quantile bin, whose edge sits near 0.9
    assert hi == x.max() and abs(lo - 0.9) < 0.02


def test_no_errors_raises():
    d = toy_dataset(np.arange(100.0), theta=np.zeros(100, bool))
    with pytest.raises(NoErrorsError):
        find_weak_slices(d)


def test_too_few_rows_raises():
    d = toy_dataset(np.arange(10.0), theta=np.arange(10) < 3)
    with pytest.raises(DegenerateInputError):
        find_weak_slices(d)


def test_bad_max_order():
    d = toy_dataset(np.arange(100.0), theta=np.arange(100) < 30)
    with pytest.raises(ValueError):
        find_weak_slices(d, SliceFinderConfig(max_order=3))


def test_found_slices_satisfy_contract(synthetic_small):
    s = find_weak_slices(synthetic_small)
    d = synthetic_small
    assert s.K > 0 and (s.N, s.M) == (d.N, d.M)
    ids = [r.id for r in s.rules]
    assert ids == sorted(ids) and len(set(ids)) == len(ids)
    for rule, ms in zip(s.rules, s.baseline_stats):
        again = map_slice(rule, d)
        assert (again.n, again.m) == (ms.n, ms.m)
        assert ms.m * d.N > d.M * ms.n
        assert hypergeom_sf(d.N, d.M, ms.n, ms.m) < s.config.filter_alpha
        assert ms.n >= s.config.support_for(d.N)
        assert 1 <= rule.order <= 2
    masks = {rule.mask(d).tobytes() for rule in s.rules}
    assert len(masks) == s.K


def test_planted_regions_are_covered(synthetic_small):
    s = find_weak_slices(synthetic_small)
    assert slice_summary(s, synthetic_small).pct_error_coverage >= 85.0


def test_coverage_matches_union_of_masks(synthetic_small):
    d = synthetic_small
    s = find_weak_slices(d)
    union = np.zeros(d.N, bool)
    for rule in s.rules:
        union |= rule.mask(d)
    expected = 100.0 * (union & d.theta).sum() / d.M
    summary = slice_summary(s, d)
    assert summary.pct_error_coverage == pytest.approx(expected)
    assert summary.pct_1feat + summary.pct_2feat == pytest.approx(100.0)
    assert summary.num_slices == s.K


def test_finder_ignores_row_order(synthetic_small):
    d = synthetic_small
    shuffled = d.take(np.random.default_rng(3).permutation(d.N))
    a, b = find_weak_slices(d), find_weak_slices(shuffled)
    assert [r.id for r in a.rules] == [r.id for r in b.rules]
    assert [(x.n, x.m) for x in a.baseline_stats] == [(x.n, x.m) for x in b.baseline_stats]


def test_slice_set_json_round_trip(tmp_path, synthetic_small):
    s = find_weak_slices(stratified_split(synthetic_small, 1).baseline, source="half")
    path = tmp_path / "slices.json"
    s.save(path)
    back = SliceSet.load(path)
    assert back.rules == s.rules
    assert [(x.n, x.m) for x in back.baseline_stats] == [(x.n, x.m) for x in s.baseline_stats]
    assert (back.N, back.M, back.source, back.schema) == (s.N, s.M, "half", s.schema)
    assert back.config.support_for(1) == s.config.support_for(s.N)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=40),
       st.floats(-5, 5), st.floats(0, 5))
def test_interval_mask_is_inclusive(xs, lo, width):
    d = toy_dataset(xs)
    ms = map_slice(SliceRule((Constraint("x", interval=(lo, lo + width)),)), d)
    assert ms.n == sum(lo <= v <= lo + width for v in xs)
    assert isinstance(ms, MappedSlice)

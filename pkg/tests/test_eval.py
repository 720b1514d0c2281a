import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glassdest import derive_bounds, filter_outliers, min_fde, split_dataset

from conftest import make_record


def test_exact_hit_gives_zero():
    preds = [np.array([[1.0, 1.0], [9.0, 9.0]])]
    rep = min_fde(preds, np.array([[1.0, 1.0]]))
    assert rep.min_fde == 0.0


def test_min_over_candidates():
    # distances 3 and 4 from the truth: the minimum wins
    preds = [np.array([[3.0, 0.0], [0.0, 4.0]])]
    rep = min_fde(preds, np.array([[0.0, 0.0]]))
    assert rep.min_fde == pytest.approx(3.0)


def test_mean_over_samples():
    preds = [np.array([[1.0, 0.0]]), np.array([[3.0, 0.0]])]
    rep = min_fde(preds, np.array([[0.0, 0.0], [0.0, 0.0]]))
    assert rep.min_fde == pytest.approx(2.0)
    assert rep.n_samples == 2


def test_length_mismatch():
    with pytest.raises(ValueError):
        min_fde([np.zeros((1, 2))], np.zeros((2, 2)))


def test_per_class_breakdown():
    preds = [np.array([[1.0, 0.0]]), np.array([[5.0, 0.0]])]
    rep = min_fde(preds, np.zeros((2, 2)), classes=["car", "bus"])
    assert rep.per_class == {"bus": 5.0, "car": 1.0}


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12))
def test_min_fde_monotone_in_k(k):
    rng = np.random.default_rng(7)
    preds = [rng.normal(size=(12, 2)) for _ in range(20)]
    gt = rng.normal(size=(20, 2))
    a = min_fde(preds, gt, k=k).min_fde
    b = min_fde(preds, gt, k=k + 1).min_fde
    assert b <= a + 1e-12


def test_injecting_the_unimodal_point_bounds_fde(rng):
    gt = rng.normal(size=(30, 2)) * 5
    uni = gt + rng.normal(0, 2.0, size=gt.shape)  # a unimodal guess
    multi = [np.vstack([rng.normal(size=(3, 2)) * 5, u]) for u in uni]
    fde_uni = min_fde([u[None, :] for u in uni], gt).min_fde
    fde_multi = min_fde(multi, gt).min_fde
    assert fde_multi <= fde_uni + 1e-12


# ---------------------------------------------------------------------------
# outlier filtering


def test_covering_bounds_remove_nothing(rng):
    T = rng.normal(size=(100, 2))
    keep, removed = filter_outliers(T, ((-10, 10), (-10, 10)))
    assert keep.all()
    assert removed == 0.0


def test_removed_fraction_counts():
    T = np.zeros((200000, 2))
    T[0] = (1e6, 0.0)
    keep, removed = filter_outliers(T, ((-10, 10), (-10, 10)))
    assert removed == pytest.approx(5e-6)
    assert not keep[0]


def test_filter_is_idempotent(rng):
    T = rng.normal(size=(500, 2)) * 10
    bounds = ((-5, 5), (-5, 5))
    keep, _ = filter_outliers(T, bounds)
    keep2, removed2 = filter_outliers(T[keep], bounds)
    assert keep2.all()
    assert removed2 == 0.0


def test_nonfinite_bounds_rejected():
    with pytest.raises(ValueError):
        filter_outliers(np.zeros((3, 2)), ((-np.inf, 1), (0, 1)))


def test_derived_bounds_cover_requested_fraction(rng):
    T = rng.normal(size=(50000, 2))
    bounds = derive_bounds(T, coverage=0.99)
    keep, removed = filter_outliers(T, bounds)
    # independent axes: joint removal is about 1 - coverage^2
    assert removed == pytest.approx(1 - 0.99**2, abs=0.005)


# ---------------------------------------------------------------------------
# splits


def _records(n):
    return [
        make_record(np.zeros((3, 2)), agent_id=f"a{i}", scene_id=f"sc{i % 4}")
        for i in range(n)
    ]


def test_all_train_split():
    recs = _records(10)
    tr, va, te = split_dataset(recs, {"fractions": [1.0, 0.0, 0.0]})
    assert len(tr) == 10 and not va and not te


def test_split_deterministic():
    recs = _records(30)
    a = split_dataset(recs, {"fractions": [0.6, 0.2, 0.2]}, seed=5)
    b = split_dataset(recs, {"fractions": [0.6, 0.2, 0.2]}, seed=5)
    for pa, pb in zip(a, b):
        assert [r.agent_id for r in pa] == [r.agent_id for r in pb]


def test_split_disjoint_partition():
    recs = _records(41)
    tr, va, te = split_dataset(recs, {"fractions": [0.5, 0.25, 0.25]}, seed=1)
    ids = [r.agent_id for part in (tr, va, te) for r in part]
    assert len(ids) == 41
    assert len(set(ids)) == 41


def test_scene_split():
    recs = _records(12)
    tr, va, te = split_dataset(
        recs, {"scenes": {"train": ["sc0", "sc1"], "val": ["sc2"], "test": ["sc3"]}}
    )
    assert {r.scene_id for r in tr} == {"sc0", "sc1"}
    assert {r.scene_id for r in va} == {"sc2"}
    assert {r.scene_id for r in te} == {"sc3"}


def test_bad_split_specs():
    recs = _records(4)
    with pytest.raises(ValueError):
        split_dataset(recs, {"fractions": [0.5, 0.5, 0.5]})
    with pytest.raises(ValueError):
        split_dataset(recs, {"scenes": {"train": []}})
    with pytest.raises(ValueError):
        split_dataset(recs, {"something": 1})
    with pytest.raises(ValueError):
        split_dataset([], {"fractions": [1.0, 0.0, 0.0]})

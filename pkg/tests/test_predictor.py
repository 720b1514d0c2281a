import json

import numpy as np
import pytest

from glassdest import (
    EbmModel,
    ScoringWeights,
    ShapeFunction,
    build_bins,
    kmeans_partition,
    load_predictor,
    predict,
    predict_top_k,
    save_predictor,
    score_modes,
    train_multimodal,
)
from glassdest.modes import Mode, ModePartition
from glassdest.predictor import (
    ClassModels,
    MultiModalPredictor,
    predictor_to_dict,
)

from conftest import quick_hp


# ---------------------------------------------------------------------------
# hand-built predictors for pure scoring checks


def _const_model(value, sigma):
    schema = build_bins(np.array([[0.0], [1.0]]), 8, names=("x",))
    return EbmModel(
        intercept=float(value),
        shapes=(ShapeFunction(feature=0, values=np.zeros(3), counts=np.array([1, 1, 0])),),
        pairs=(),
        binning=schema,
        residual_sigma=float(sigma),
        hyperparams=quick_hp(),
    )


def _toy_predictor(mode_preds, centroids, sigma_all=2.0, weights=None, lambda3=0.5):
    modes = tuple(
        Mode(id=i, centroid=np.asarray(c, dtype=float), sigma=np.ones(2), count=10)
        for i, c in enumerate(centroids)
    )
    mode_models = tuple(
        (_const_model(px, 1.0), _const_model(py, 1.0)) for px, py in mode_preds
    )
    cm = ClassModels(
        global_x=_const_model(np.mean([p[0] for p in mode_preds]), sigma_all),
        global_y=_const_model(np.mean([p[1] for p in mode_preds]), sigma_all),
        partition=ModePartition(kind="kmeans", modes=modes, seed=0),
        mode_models=mode_models,
        lambda3=lambda3,
        lambda4=1.0 - lambda3,
    )
    return MultiModalPredictor(
        classes={"pedestrian": cm},
        weights=weights or ScoringWeights(),
        schema="sdd",
        top_k=len(modes),
        hyperparams=quick_hp(),
    )


def test_weight_validation():
    with pytest.raises(ValueError):
        ScoringWeights(lambda1=-0.1)
    with pytest.raises(ValueError):
        ScoringWeights(lambda1=0.0, lambda2=0.0)
    with pytest.raises(ValueError):
        ScoringWeights(rule="whatever")
    with pytest.raises(ValueError):
        ScoringWeights(min_sigma=0.0)


def test_single_mode_probability_one():
    p = _toy_predictor([(5.0, 5.0)], [(5.0, 5.0)])
    pred = predict_top_k(p, [0.5], "pedestrian")
    np.testing.assert_allclose(pred.probabilities, [1.0])


def test_symmetric_modes_score_equally():
    p = _toy_predictor([(5.0, 5.0), (5.0, -5.0)], [(5.0, 5.0), (5.0, -5.0)])
    _, scores = score_modes(p, [0.5], "pedestrian")
    assert scores[0] == pytest.approx(scores[1], abs=1e-9)
    pred = predict_top_k(p, [0.5], "pedestrian")
    np.testing.assert_allclose(pred.probabilities, [0.5, 0.5], atol=1e-9)
    # equal probabilities rank by lower mode id
    np.testing.assert_allclose(pred.points[0], [5.0, 5.0])


def test_lambda2_zero_ignores_global_spread():
    w = ScoringWeights(lambda1=1.0, lambda2=0.0)
    a = _toy_predictor([(3.0, 1.0), (6.0, -2.0)], [(4.0, 0.0), (5.0, -1.0)],
                       sigma_all=2.0, weights=w)
    b = _toy_predictor([(3.0, 1.0), (6.0, -2.0)], [(4.0, 0.0), (5.0, -1.0)],
                       sigma_all=4.0, weights=w)
    _, sa = score_modes(a, [0.5], "pedestrian")
    _, sb = score_modes(b, [0.5], "pedestrian")
    np.testing.assert_allclose(sa, sb, atol=1e-12)


def test_top_k_truncation_and_renormalization():
    p = _toy_predictor(
        [(1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (4.0, 0.0)],
        [(1.0, 0.0), (2.5, 0.0), (3.0, 0.0), (3.5, 0.0)],
    )
    full = predict_top_k(p, [0.5], "pedestrian", k=10)
    assert len(full.points) == 4
    assert full.probabilities.sum() == pytest.approx(1.0, abs=1e-9)
    top2 = predict_top_k(p, [0.5], "pedestrian", k=2)
    assert len(top2.points) == 2
    assert top2.probabilities.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(np.diff(top2.probabilities) <= 1e-12)
    with pytest.raises(ValueError):
        predict_top_k(p, [0.5], "pedestrian", k=0)


def test_softmax_shift_invariance():
    p = _toy_predictor([(3.0, 1.0), (6.0, -2.0)], [(4.0, 0.0), (5.0, -1.0)])
    _, scores = score_modes(p, [0.5], "pedestrian")

    def softmax(s):
        z = np.exp(s - s.max())
        return z / z.sum()

    pred = predict_top_k(p, [0.5], "pedestrian")
    order = np.argsort(-softmax(scores), kind="stable")
    np.testing.assert_allclose(pred.probabilities, softmax(scores)[order], atol=1e-12)
    np.testing.assert_allclose(softmax(scores + 123.0), softmax(scores), atol=1e-9)


def test_lambda4_zero_ranking_depends_only_on_x():
    w = ScoringWeights(rule="fixed", lambda3=1.0, lambda4=0.0)
    base = _toy_predictor(
        [(3.0, 1.0), (6.0, -2.0)], [(4.0, 0.0), (5.0, -1.0)], weights=w, lambda3=1.0
    )
    perturbed = _toy_predictor(
        [(3.0, 99.0), (6.0, -77.0)], [(4.0, 0.0), (5.0, -1.0)], weights=w, lambda3=1.0
    )
    a = predict_top_k(base, [0.5], "pedestrian")
    b = predict_top_k(perturbed, [0.5], "pedestrian")
    np.testing.assert_allclose(a.probabilities, b.probabilities, atol=1e-9)
    np.testing.assert_allclose(a.points[:, 0], b.points[:, 0], atol=1e-9)


def test_unknown_class_rejected():
    p = _toy_predictor([(1.0, 1.0)], [(1.0, 1.0)])
    with pytest.raises(ValueError):
        score_modes(p, [0.5], "bus")


# ---------------------------------------------------------------------------
# end-to-end training


def _bimodal_dataset(rng, n=300):
    X = np.column_stack([rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)])
    side = np.where(X[:, 0] > 0, 10.0, -10.0)
    T = np.column_stack([side + rng.normal(0, 0.3, n), rng.normal(0, 0.3, n)])
    return X, T


def test_single_mode_partition_matches_global(rng):
    X, T = _bimodal_dataset(rng)
    cls = np.array(["pedestrian"] * len(X))
    part = kmeans_partition(T, 1, seed=0)
    p = train_multimodal(
        X, T, cls,
        hyperparams=quick_hp(max_rounds=60),
        partitions={"pedestrian": part},
        top_k=1,
        min_mode_members=2,
    )
    cm = p.classes["pedestrian"]
    for x in X[:20]:
        pred = predict_top_k(p, x, "pedestrian", k=1)
        assert pred.points[0][0] == predict(cm.global_x, x)
        assert pred.points[0][1] == predict(cm.global_y, x)
        np.testing.assert_allclose(pred.probabilities, [1.0])


def test_one_class_dataset(rng):
    X, T = _bimodal_dataset(rng, n=120)
    cls = np.array(["car"] * len(X))
    p = train_multimodal(
        X, T, cls,
        hyperparams=quick_hp(max_rounds=40),
        partitions={"car": kmeans_partition(T, 2, seed=0)},
        top_k=2,
        min_mode_members=2,
    )
    assert set(p.classes) == {"car"}
    l3, l4 = p.classes["car"].lambda3, p.classes["car"].lambda4
    assert l3 + l4 == pytest.approx(1.0)


def test_training_is_deterministic(rng):
    X, T = _bimodal_dataset(rng, n=150)
    cls = np.array(["pedestrian"] * len(X))
    kw = dict(
        hyperparams=quick_hp(max_rounds=40, outer_bags=2, early_stop_patience=10),
        top_k=2,
        min_mode_members=2,
    )
    a = train_multimodal(X, T, cls, partitions={"pedestrian": kmeans_partition(T, 2, seed=0)}, **kw)
    b = train_multimodal(X, T, cls, partitions={"pedestrian": kmeans_partition(T, 2, seed=0)}, **kw)
    assert json.dumps(predictor_to_dict(a), sort_keys=True) == json.dumps(
        predictor_to_dict(b), sort_keys=True
    )


def test_mode_model_locality(rng):
    X, T = _bimodal_dataset(rng, n=200)
    cls = np.array(["pedestrian"] * len(X))
    part = kmeans_partition(T, 2, seed=0)
    from glassdest import assign_modes

    labels = assign_modes(part, T)
    T2 = T.copy()
    T2[labels == 1] += 0.13  # stays inside mode 1's basin

    kw = dict(hyperparams=quick_hp(max_rounds=40), partitions={"pedestrian": part},
              top_k=2, min_mode_members=2)
    a = train_multimodal(X, T, cls, **kw)
    b = train_multimodal(X, T2, cls, **kw)
    from glassdest.ebm import model_to_dict

    am, bm = a.classes["pedestrian"].mode_models, b.classes["pedestrian"].mode_models
    assert json.dumps(model_to_dict(am[0][0])) == json.dumps(model_to_dict(bm[0][0]))
    assert json.dumps(model_to_dict(am[0][1])) == json.dumps(model_to_dict(bm[0][1]))
    assert json.dumps(model_to_dict(am[1][0])) != json.dumps(model_to_dict(bm[1][0]))


def test_predictor_persistence_roundtrip(tmp_path, rng):
    X, T = _bimodal_dataset(rng, n=150)
    cls = np.array(["pedestrian"] * len(X))
    p = train_multimodal(
        X, T, cls,
        hyperparams=quick_hp(max_rounds=40),
        partitions={"pedestrian": kmeans_partition(T, 2, seed=0)},
        top_k=2,
        min_mode_members=2,
    )
    path = tmp_path / "pred.json"
    save_predictor(p, path)
    loaded = load_predictor(path)
    for x in X[:10]:
        a = predict_top_k(p, x, "pedestrian")
        b = predict_top_k(loaded, x, "pedestrian")
        np.testing.assert_array_equal(a.points, b.points)
        np.testing.assert_array_equal(a.probabilities, b.probabilities)
    save_predictor(loaded, tmp_path / "again.json")
    assert (tmp_path / "again.json").read_bytes() == path.read_bytes()


def test_probabilities_always_normalized(rng):
    X, T = _bimodal_dataset(rng, n=200)
    cls = np.array(["pedestrian"] * len(X))
    p = train_multimodal(
        X, T, cls,
        hyperparams=quick_hp(max_rounds=40),
        partitions={"pedestrian": kmeans_partition(T, 2, seed=0)},
        top_k=2,
        min_mode_members=2,
    )
    for x in rng.uniform(-2, 2, size=(50, 2)):
        pred = predict_top_k(p, x, "pedestrian")
        assert pred.probabilities.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(pred.probabilities >= 0)

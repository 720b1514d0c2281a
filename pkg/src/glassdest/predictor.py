"""Multi-modal destination prediction.

Per agent class the predictor holds one global model per axis plus one
model pair per destination mode. Modes are scored by a weighted sum of two
Gaussian log-likelihoods per axis (mode-level fit and consistency with the
global model), combined across axes, softmax-normalized and truncated to
the top K.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .ebm import (
    EbmHyperparams,
    EbmModel,
    fit_ebm,
    model_from_dict,
    model_to_dict,
    predict,
)
from .modes import (
    Mode,
    ModePartition,
    PRESETS,
    build_preset_partition,
    merge_small_modes,
)


@dataclass(frozen=True)
class ScoringWeights:
    lambda1: float = 0.5  # weight of the mode-level likelihood term
    lambda2: float = 0.5  # weight of the global-consistency term
    rule: str = "from-axis-spread"  # how lambda3/lambda4 are derived
    lambda3: float = 0.5  # used only when rule == "fixed"
    lambda4: float = 0.5
    min_sigma: float = 1e-3  # spread floor for degenerate modes

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda1 and lambda2 must be nonnegative")
        if self.lambda1 == 0 and self.lambda2 == 0:
            raise ValueError("lambda1 and lambda2 cannot both be zero")
        if self.rule not in ("from-axis-spread", "fixed"):
            raise ValueError(f"unknown weight rule '{self.rule}'")
        if self.min_sigma <= 0:
            raise ValueError("min_sigma must be positive")


@dataclass(frozen=True)
class ClassModels:
    global_x: EbmModel
    global_y: EbmModel
    partition: ModePartition
    mode_models: tuple  # ((x_model, y_model), ...) aligned with partition.modes
    lambda3: float
    lambda4: float


@dataclass(frozen=True)
class MultiModalPredictor:
    classes: dict  # agent class -> ClassModels
    weights: ScoringWeights
    schema: str
    top_k: int
    hyperparams: EbmHyperparams
    feature_names: tuple = ()
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Prediction:
    points: np.ndarray  # (K, 2) destination candidates, descending probability
    probabilities: np.ndarray  # (K,), nonnegative, sums to 1
    frame: object = None  # CanonicalFrame for mapping back to scene units


def _axis_weights(weights: ScoringWeights, sigma_x: float, sigma_y: float):
    if weights.rule == "fixed":
        total = weights.lambda3 + weights.lambda4
        if total <= 0:
            raise ValueError("fixed lambda3 + lambda4 must be positive")
        return weights.lambda3 / total, weights.lambda4 / total
    sx = max(sigma_x, weights.min_sigma)
    sy = max(sigma_y, weights.min_sigma)
    l3 = sx / (sx + sy)
    return l3, 1.0 - l3


def train_multimodal(
    features,
    targets,
    classes,
    *,
    schema: str = "sdd",
    hyperparams: EbmHyperparams = EbmHyperparams(),
    weights: ScoringWeights = ScoringWeights(),
    preset: str | None = None,
    partitions: dict | None = None,
    top_k: int | None = None,
    min_mode_members: int = 20,
    feature_names=None,
) -> MultiModalPredictor:
    """Fit global and per-mode per-axis models for every agent class.

    ``partitions`` may pre-assign a ModePartition per class; otherwise one is
    built from that class's targets using ``preset`` (default: the schema
    name). Every component model is fitted with the same rng seed, so a
    single-mode partition reproduces the global models exactly.
    """
    X = np.asarray(features, dtype=float)
    T = np.asarray(targets, dtype=float)
    cls = np.asarray(classes)
    if X.ndim != 2 or T.shape != (len(X), 2) or cls.shape != (len(X),):
        raise ValueError("features (n,p), targets (n,2) and classes (n,) required")
    preset = preset or schema
    if partitions is None and preset not in PRESETS:
        raise ValueError(f"unknown mode preset '{preset}'")
    if top_k is None:
        top_k = PRESETS[preset].top_k if preset in PRESETS else len(T)

    out = {}
    for c in sorted(set(cls.tolist())):
        sel = cls == c
        Xc, Tc = X[sel], T[sel]
        if len(Xc) < 2:
            raise ValueError(f"class '{c}' has fewer than 2 samples")
        if partitions is not None and c in partitions:
            part = partitions[c]
        else:
            part = build_preset_partition(preset, Tc, hyperparams.rng_seed)
        part, labels = merge_small_modes(part, Tc, min_mode_members)

        gx = fit_ebm(Xc, Tc[:, 0], hyperparams, feature_names)
        gy = fit_ebm(Xc, Tc[:, 1], hyperparams, feature_names)
        mode_models = []
        for mode in part.modes:
            m = labels == mode.id
            mode_models.append(
                (
                    fit_ebm(Xc[m], Tc[m, 0], hyperparams, feature_names),
                    fit_ebm(Xc[m], Tc[m, 1], hyperparams, feature_names),
                )
            )
        l3, l4 = _axis_weights(weights, gx.residual_sigma, gy.residual_sigma)
        out[c] = ClassModels(
            global_x=gx,
            global_y=gy,
            partition=part,
            mode_models=tuple(mode_models),
            lambda3=l3,
            lambda4=l4,
        )
    return MultiModalPredictor(
        classes=out,
        weights=weights,
        schema=schema,
        top_k=top_k,
        hyperparams=hyperparams,
        feature_names=tuple(feature_names) if feature_names else (),
    )


_LOG_2PI = float(np.log(2.0 * np.pi))


def _gauss_logpdf(v, mu, sigma, floor):
    s = max(float(sigma), floor)
    z = (v - mu) / s
    return -0.5 * z * z - np.log(s) - 0.5 * _LOG_2PI


def score_modes(predictor: MultiModalPredictor, features, agent_class: str):
    """Per-mode candidate points and combined log-scores for one input."""
    if agent_class not in predictor.classes:
        raise ValueError(f"no models for agent class '{agent_class}'")
    cm = predictor.classes[agent_class]
    w = predictor.weights
    gx = predict(cm.global_x, features)
    gy = predict(cm.global_y, features)
    sx = cm.global_x.residual_sigma
    sy = cm.global_y.residual_sigma

    n_modes = len(cm.partition.modes)
    points = np.empty((n_modes, 2))
    scores = np.empty(n_modes)
    for i, (mode, (mx, my)) in enumerate(zip(cm.partition.modes, cm.mode_models)):
        px = predict(mx, features)
        py = predict(my, features)
        lx = w.lambda1 * _gauss_logpdf(px, mode.centroid[0], mode.sigma[0], w.min_sigma)
        lx += w.lambda2 * _gauss_logpdf(px, gx, sx, w.min_sigma)
        ly = w.lambda1 * _gauss_logpdf(py, mode.centroid[1], mode.sigma[1], w.min_sigma)
        ly += w.lambda2 * _gauss_logpdf(py, gy, sy, w.min_sigma)
        points[i] = (px, py)
        scores[i] = cm.lambda3 * lx + cm.lambda4 * ly
    return points, scores


def predict_top_k(
    predictor: MultiModalPredictor,
    features,
    agent_class: str,
    k: int | None = None,
    frame=None,
) -> Prediction:
    """Softmax the mode scores and return the K most probable destinations."""
    if k is None:
        k = predictor.top_k
    if k < 1:
        raise ValueError("k must be >= 1")
    points, scores = score_modes(predictor, features, agent_class)
    z = np.exp(scores - scores.max())
    probs = z / z.sum()
    order = sorted(range(len(probs)), key=lambda i: (-probs[i], i))[: min(k, len(probs))]
    sel = probs[order]
    return Prediction(
        points=points[order],
        probabilities=sel / sel.sum(),
        frame=frame,
    )


# ---------------------------------------------------------------------------
# persistence

_FORMAT = "glassdest-predictor"
_VERSION = 1


def _partition_to_dict(part: ModePartition) -> dict:
    return {
        "kind": part.kind,
        "seed": part.seed,
        "extent": list(part.extent) if part.extent else None,
        "modes": [
            {
                "id": m.id,
                "centroid": m.centroid.tolist(),
                "sigma": m.sigma.tolist(),
                "count": m.count,
                "rects": [list(r) for r in m.rects],
            }
            for m in part.modes
        ],
    }


def _partition_from_dict(d: dict) -> ModePartition:
    return ModePartition(
        kind=d["kind"],
        modes=tuple(
            Mode(
                id=m["id"],
                centroid=np.asarray(m["centroid"], dtype=float),
                sigma=np.asarray(m["sigma"], dtype=float),
                count=m["count"],
                rects=tuple(tuple(r) for r in m["rects"]),
            )
            for m in d["modes"]
        ),
        extent=tuple(d["extent"]) if d["extent"] else None,
        seed=d["seed"],
    )


def predictor_to_dict(predictor: MultiModalPredictor) -> dict:
    return {
        "format": _FORMAT,
        "version": _VERSION,
        "schema": predictor.schema,
        "top_k": predictor.top_k,
        "feature_names": list(predictor.feature_names),
        "hyperparams": model_to_dict_hp(predictor.hyperparams),
        "weights": {
            "lambda1": predictor.weights.lambda1,
            "lambda2": predictor.weights.lambda2,
            "rule": predictor.weights.rule,
            "lambda3": predictor.weights.lambda3,
            "lambda4": predictor.weights.lambda4,
            "min_sigma": predictor.weights.min_sigma,
        },
        "classes": {
            c: {
                "global_x": model_to_dict(cm.global_x),
                "global_y": model_to_dict(cm.global_y),
                "partition": _partition_to_dict(cm.partition),
                "modes": [
                    {"x": model_to_dict(mx), "y": model_to_dict(my)}
                    for mx, my in cm.mode_models
                ],
                "lambda3": cm.lambda3,
                "lambda4": cm.lambda4,
            }
            for c, cm in sorted(predictor.classes.items())
        },
    }


def model_to_dict_hp(hp: EbmHyperparams) -> dict:
    return {
        "max_feature_bins": hp.max_feature_bins,
        "max_interaction_bins": hp.max_interaction_bins,
        "max_rounds": hp.max_rounds,
        "learning_rate": hp.learning_rate,
        "max_leaves": hp.max_leaves,
        "outer_bags": hp.outer_bags,
        "validation_fraction": hp.validation_fraction,
        "early_stop_patience": hp.early_stop_patience,
        "num_pairs": hp.num_pairs,
        "rng_seed": hp.rng_seed,
    }


def predictor_from_dict(d: dict) -> MultiModalPredictor:
    if d.get("format") != _FORMAT:
        raise ValueError(f"not a {_FORMAT} document")
    classes = {}
    for c, cd in d["classes"].items():
        classes[c] = ClassModels(
            global_x=model_from_dict(cd["global_x"]),
            global_y=model_from_dict(cd["global_y"]),
            partition=_partition_from_dict(cd["partition"]),
            mode_models=tuple(
                (model_from_dict(m["x"]), model_from_dict(m["y"]))
                for m in cd["modes"]
            ),
            lambda3=float(cd["lambda3"]),
            lambda4=float(cd["lambda4"]),
        )
    return MultiModalPredictor(
        classes=classes,
        weights=ScoringWeights(**d["weights"]),
        schema=d["schema"],
        top_k=int(d["top_k"]),
        hyperparams=EbmHyperparams(**d["hyperparams"]),
        feature_names=tuple(d.get("feature_names", ())),
    )


def save_predictor(predictor: MultiModalPredictor, path) -> None:
    with open(path, "w") as f:
        json.dump(predictor_to_dict(predictor), f, sort_keys=True, indent=1)


def load_predictor(path) -> MultiModalPredictor:
    with open(path) as f:
        return predictor_from_dict(json.load(f))

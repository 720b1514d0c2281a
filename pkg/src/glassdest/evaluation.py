"""Dataset hygiene and the benchmark metric (minimum final displacement error)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class EvalReport:
    n_samples: int
    min_fde: float
    k: int
    per_class: dict = field(default_factory=dict)
    removed_fraction: float = 0.0

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "min_fde": self.min_fde,
            "k": self.k,
            "per_class": dict(self.per_class),
            "removed_fraction": self.removed_fraction,
        }


def min_fde(predictions, ground_truth, classes=None, k=None, removed_fraction=0.0) -> EvalReport:
    """Mean over samples of the smallest distance from the true endpoint to
    any of the (first K) predicted points.

    ``predictions`` is a sequence of (K_i, 2) point arrays (or Prediction
    objects) in the same frame as ``ground_truth``.
    """
    gt = np.asarray(ground_truth, dtype=float)
    if len(predictions) != len(gt):
        raise ValueError(
            f"got {len(predictions)} prediction sets for {len(gt)} ground truths"
        )
    if len(gt) == 0:
        raise ValueError("no samples to evaluate")
    per_sample = np.empty(len(gt))
    used_k = 0
    for i, pred in enumerate(predictions):
        pts = np.asarray(getattr(pred, "points", pred), dtype=float).reshape(-1, 2)
        if k is not None:
            pts = pts[:k]
        used_k = max(used_k, len(pts))
        per_sample[i] = np.sqrt(((pts - gt[i]) ** 2).sum(axis=1)).min()
    per_class = {}
    if classes is not None:
        cls = np.asarray(classes)
        for c in sorted(set(cls.tolist())):
            per_class[c] = float(per_sample[cls == c].mean())
    return EvalReport(
        n_samples=len(gt),
        min_fde=float(per_sample.mean()),
        k=int(k if k is not None else used_k),
        per_class=per_class,
        removed_fraction=float(removed_fraction),
    )


def filter_outliers(targets, bounds):
    """Keep points with both coordinates inside per-axis bounds.

    ``bounds`` is ((x_lo, x_hi), (y_lo, y_hi)). Returns (keep mask, removed
    fraction). Idempotent by construction.
    """
    X = np.asarray(targets, dtype=float)
    (x_lo, x_hi), (y_lo, y_hi) = bounds
    for b in (x_lo, x_hi, y_lo, y_hi):
        if not np.isfinite(b):
            raise ValueError("outlier bounds must be finite")
    keep = (X[:, 0] >= x_lo) & (X[:, 0] <= x_hi) & (X[:, 1] >= y_lo) & (X[:, 1] <= y_hi)
    removed = 1.0 - keep.mean() if len(X) else 0.0
    return keep, float(removed)


def derive_bounds(targets, coverage: float = 0.99995):
    """Axis-aligned box containing ``coverage`` of the targets per axis."""
    X = np.asarray(targets, dtype=float)
    tail = (1.0 - coverage) / 2.0
    return (
        (float(np.quantile(X[:, 0], tail)), float(np.quantile(X[:, 0], 1 - tail))),
        (float(np.quantile(X[:, 1], tail)), float(np.quantile(X[:, 1], 1 - tail))),
    )


def split_dataset(records, split_spec, seed: int = 0):
    """Split records into (train, val, test).

    ``split_spec`` is either ``{"fractions": [tr, va, te]}`` (seeded random,
    disjoint) or ``{"scenes": {"train": [...], "val": [...], "test": [...]}}``
    routing records by their scene id.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to split")
    if "fractions" in split_spec:
        fr = list(split_spec["fractions"])
        if len(fr) != 3 or min(fr) < 0 or abs(sum(fr) - 1.0) > 1e-9:
            raise ValueError("fractions must be three nonnegative values summing to 1")
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(records))
        n_tr = int(round(fr[0] * len(records)))
        n_va = int(round(fr[1] * len(records)))
        tr = [records[i] for i in order[:n_tr]]
        va = [records[i] for i in order[n_tr : n_tr + n_va]]
        te = [records[i] for i in order[n_tr + n_va :]]
        return tr, va, te
    if "scenes" in split_spec:
        scenes = split_spec["scenes"]
        for part in ("train", "val", "test"):
            if part not in scenes:
                raise ValueError(f"scene split is missing the '{part}' list")
        sets = {p: set(scenes[p]) for p in ("train", "val", "test")}
        out = {p: [] for p in sets}
        for r in records:
            for p in ("train", "val", "test"):
                if r.scene_id in sets[p]:
                    out[p].append(r)
                    break
        return out["train"], out["val"], out["test"]
    raise ValueError("split spec needs either 'fractions' or 'scenes'")

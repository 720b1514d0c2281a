"""Exact term-level decomposition of fitted additive models.

Because prediction is intercept + sum of per-term table lookups, global
importance, dependence curves and local contribution breakdowns are read
straight off the model, with no sampling or surrogate approximation.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .binning import BinnedDataset, apply_bins
from .ebm import EbmModel


@dataclass(frozen=True)
class ImportanceReport:
    terms: tuple  # term labels, features first then pairs
    values: np.ndarray  # mean |contribution| per term over the reference set


@dataclass(frozen=True)
class DependenceCurve:
    term: str
    values: np.ndarray  # per-bin contribution (1D) or pair grid (2D)
    populations: np.ndarray
    edges: np.ndarray  # bin edges along the (first) feature axis
    edges_y: np.ndarray | None = None  # second axis for pair terms
    missing_value: float = 0.0


@dataclass(frozen=True)
class LocalExplanation:
    intercept: float
    terms: tuple
    contributions: np.ndarray
    prediction: float


def _feature_label(model: EbmModel, j: int) -> str:
    return model.binning.names[j]


def term_labels(model: EbmModel) -> tuple:
    labels = [_feature_label(model, s.feature) for s in model.shapes]
    labels += [
        f"{_feature_label(model, j)} x {_feature_label(model, k)}"
        for j, k in (p.features for p in model.pairs)
    ]
    return tuple(labels)


def _term_contributions(model: EbmModel, bins: np.ndarray) -> np.ndarray:
    """Per-row contribution of every term; shape (n, n_terms)."""
    cols = [shape.values[bins[:, shape.feature]] for shape in model.shapes]
    for pair in model.pairs:
        j, k = pair.features
        cols.append(pair.grid[pair.coarse_j[bins[:, j]], pair.coarse_k[bins[:, k]]])
    return np.column_stack(cols) if cols else np.empty((bins.shape[0], 0))


def _as_binned(model: EbmModel, reference) -> BinnedDataset:
    if isinstance(reference, BinnedDataset):
        if reference.bins.shape[1] != model.binning.n_features:
            raise ValueError("reference width does not match model schema")
        return reference
    return apply_bins(model.binning, np.asarray(reference, dtype=float))


def global_importance(model: EbmModel, reference) -> ImportanceReport:
    """Mean absolute contribution of each term over a reference dataset."""
    binned = _as_binned(model, reference)
    if len(binned) == 0:
        raise ValueError("reference dataset is empty")
    contribs = _term_contributions(model, binned.bins)
    return ImportanceReport(
        terms=term_labels(model),
        values=np.abs(contribs).mean(axis=0),
    )


def _feature_edges(model: EbmModel, j: int) -> np.ndarray:
    cuts = model.binning.cuts[j]
    lo = model.binning.vmin[j]
    hi = model.binning.vmax[j]
    return np.concatenate(([lo], cuts, [hi]))


def _coarse_edges(model: EbmModel, j: int, coarse: np.ndarray) -> np.ndarray:
    """Edges of the interaction bins, recovered from the fine cut points."""
    fine_edges = _feature_edges(model, j)
    nb = model.binning.n_bins(j)
    boundaries = [fine_edges[0]]
    for i in range(1, nb):
        if coarse[i] != coarse[i - 1]:
            boundaries.append(fine_edges[i])
    boundaries.append(fine_edges[-1])
    return np.asarray(boundaries)


def partial_dependence(model: EbmModel, term) -> DependenceCurve:
    """The stored shape of one term, verbatim.

    ``term`` is either a feature index or a (j, k) pair of feature indices.
    For an additive model this is the exact dependence, not an estimate.
    """
    if isinstance(term, (int, np.integer)):
        for shape in model.shapes:
            if shape.feature == term:
                nb = model.binning.n_bins(term)
                return DependenceCurve(
                    term=_feature_label(model, term),
                    values=shape.values[:nb].copy(),
                    populations=shape.counts[:nb].copy(),
                    edges=_feature_edges(model, term),
                    missing_value=float(shape.values[nb]),
                )
        raise ValueError(f"model has no feature term {term}")
    jk = tuple(term)
    for pair in model.pairs:
        if pair.features == jk:
            gj = pair.grid.shape[0] - 1
            gk = pair.grid.shape[1] - 1
            j, k = jk
            return DependenceCurve(
                term=f"{_feature_label(model, j)} x {_feature_label(model, k)}",
                values=pair.grid[:gj, :gk].copy(),
                populations=pair.counts[:gj, :gk].copy(),
                edges=_coarse_edges(model, j, pair.coarse_j),
                edges_y=_coarse_edges(model, k, pair.coarse_k),
            )
    raise ValueError(f"model has no pair term {jk}")


def local_explain(model: EbmModel, features) -> LocalExplanation:
    """Per-term contributions of one prediction; they sum to it exactly."""
    x = np.asarray(features, dtype=float)
    binned = apply_bins(model.binning, x)
    contribs = _term_contributions(model, binned.bins)[0]
    return LocalExplanation(
        intercept=model.intercept,
        terms=term_labels(model),
        contributions=contribs,
        prediction=float(model.intercept + contribs.sum()),
    )


# ---------------------------------------------------------------------------
# file exports


def write_importance_csv(report: ImportanceReport, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["term", "value"])
        for t, v in zip(report.terms, report.values):
            w.writerow([t, repr(float(v))])


def write_dependence_csv(curve: DependenceCurve, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        if curve.values.ndim == 1:
            w.writerow(["bin_low", "bin_high", "contribution", "population"])
            for i, v in enumerate(curve.values):
                w.writerow(
                    [
                        repr(float(curve.edges[i])),
                        repr(float(curve.edges[i + 1])),
                        repr(float(v)),
                        int(curve.populations[i]),
                    ]
                )
            w.writerow(["missing", "missing", repr(float(curve.missing_value)), ""])
        else:
            w.writerow(["x_low", "x_high", "y_low", "y_high", "contribution", "population"])
            for i in range(curve.values.shape[0]):
                for j in range(curve.values.shape[1]):
                    w.writerow(
                        [
                            repr(float(curve.edges[i])),
                            repr(float(curve.edges[i + 1])),
                            repr(float(curve.edges_y[j])),
                            repr(float(curve.edges_y[j + 1])),
                            repr(float(curve.values[i, j])),
                            int(curve.populations[i, j]),
                        ]
                    )


def write_local_csv(expl: LocalExplanation, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["term", "contribution"])
        w.writerow(["intercept", repr(expl.intercept)])
        for t, v in zip(expl.terms, expl.contributions):
            w.writerow([t, repr(float(v))])
        w.writerow(["prediction", repr(expl.prediction)])


def render_importance_svg(report: ImportanceReport, path, title="") -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    order = np.argsort(report.values)
    fig, ax = plt.subplots(figsize=(6, max(2, 0.3 * len(report.terms))))
    ax.barh(np.arange(len(order)), report.values[order])
    ax.set_yticks(np.arange(len(order)))
    ax.set_yticklabels([report.terms[i] for i in order], fontsize=7)
    ax.set_xlabel("mean |contribution|")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def render_dependence_svg(curve: DependenceCurve, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    if curve.values.ndim == 1:
        ax.stairs(curve.values, curve.edges)
        ax.set_xlabel(curve.term)
        ax.set_ylabel("contribution")
    else:
        im = ax.pcolormesh(curve.edges_y, curve.edges, curve.values, shading="flat")
        fig.colorbar(im, ax=ax)
        ax.set_title(curve.term)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)

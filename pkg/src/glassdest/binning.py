"""Quantile binning of real-valued feature matrices.

Bins are left-exclusive: a value equal to a cut point lands in the higher
bin, values below the first cut land in bin 0 and values above the last cut
land in the final ordered bin. Every feature carries one extra trailing bin
for missing (non-finite) values.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SchemaMismatchError(ValueError):
    """Feature matrix width does not match the binning schema."""


@dataclass(frozen=True)
class BinningSchema:
    """Per-feature cut points plus observed value range for plotting."""

    cuts: tuple  # per feature: strictly increasing ndarray of cut points
    vmin: np.ndarray  # per feature: smallest finite training value (nan if none)
    vmax: np.ndarray
    names: tuple

    @property
    def n_features(self) -> int:
        return len(self.cuts)

    def n_bins(self, j: int) -> int:
        """Ordered bins for feature j, excluding the missing bin."""
        return len(self.cuts[j]) + 1

    def missing_bin(self, j: int) -> int:
        return self.n_bins(j)

    def total_bins(self, j: int) -> int:
        return self.n_bins(j) + 1


@dataclass(frozen=True)
class BinnedDataset:
    schema: BinningSchema
    bins: np.ndarray  # (n, p) int32 bin indices

    def __len__(self) -> int:
        return self.bins.shape[0]


def _feature_cuts(col: np.ndarray, max_bins: int) -> np.ndarray:
    finite = col[np.isfinite(col)]
    if finite.size == 0:
        return np.empty(0)
    uniq = np.unique(finite)
    if uniq.size <= 1:
        return np.empty(0)
    if uniq.size <= max_bins:
        return (uniq[:-1] + uniq[1:]) / 2.0
    s = np.sort(finite)
    idx = np.arange(1, max_bins) * s.size // max_bins
    cuts = (s[idx - 1] + s[idx]) / 2.0
    return np.unique(cuts)


def build_bins(feature_matrix, max_bins: int, names=None) -> BinningSchema:
    """Quantile-based cut points yielding at most ``max_bins`` bins per feature.

    Duplicate quantiles are merged; a constant feature yields exactly one bin.
    """
    X = np.asarray(feature_matrix, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError("feature matrix must be a non-empty 2D array")
    if max_bins < 2:
        raise ValueError(f"max_bins must be >= 2, got {max_bins}")
    p = X.shape[1]
    if names is None:
        names = tuple(f"f{j}" for j in range(p))
    else:
        names = tuple(names)
        if len(names) != p:
            raise ValueError("feature name count does not match matrix width")
    cuts = tuple(_feature_cuts(X[:, j], max_bins) for j in range(p))
    vmin = np.empty(p)
    vmax = np.empty(p)
    for j in range(p):
        finite = X[np.isfinite(X[:, j]), j]
        vmin[j] = finite.min() if finite.size else np.nan
        vmax[j] = finite.max() if finite.size else np.nan
    return BinningSchema(cuts=cuts, vmin=vmin, vmax=vmax, names=names)


def apply_bins(schema: BinningSchema, feature_matrix) -> BinnedDataset:
    """Map every value to its bin index; non-finite values go to the missing bin."""
    X = np.asarray(feature_matrix, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != schema.n_features:
        raise SchemaMismatchError(
            f"expected {schema.n_features} features, got {X.shape[1]}"
        )
    B = np.empty(X.shape, dtype=np.int32)
    for j in range(schema.n_features):
        col = X[:, j]
        finite = np.isfinite(col)
        b = np.searchsorted(schema.cuts[j], np.where(finite, col, 0.0), side="right")
        b[~finite] = schema.missing_bin(j)
        B[:, j] = b
    return BinnedDataset(schema=schema, bins=B)


def bin_dataset(feature_matrix, max_bins: int, names=None) -> BinnedDataset:
    """Build a schema from the matrix and bin the same matrix with it."""
    return apply_bins(build_bins(feature_matrix, max_bins, names), feature_matrix)

"""Destination-mode partitions: K-means clusters or rectangular grids.

A partition fixes, per mode, the centroid, per-axis target spread and member
count that the multi-modal scorer consumes, plus rectangle extents for grid
partitions (one mode may own several rectangles after small-mode merging).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Mode:
    id: int
    centroid: np.ndarray  # (2,)
    sigma: np.ndarray  # (2,) per-axis std of member targets
    count: int
    rects: tuple = ()  # (x0, y0, x1, y1) rectangles; empty for kmeans modes


@dataclass(frozen=True)
class ModePartition:
    kind: str  # "kmeans" | "grid"
    modes: tuple
    extent: tuple | None = None  # (x0, x1, y0, y1) for grid partitions
    seed: int | None = None

    def __len__(self) -> int:
        return len(self.modes)

    def centroids(self) -> np.ndarray:
        return np.stack([m.centroid for m in self.modes])


@dataclass(frozen=True)
class ModePreset:
    kind: str
    n_modes: int
    top_k: int
    x_slices: int = 0
    y_cut_fractions: tuple = ()


PRESETS = {
    "sdd": ModePreset(kind="kmeans", n_modes=36, top_k=20),
    "ind": ModePreset(kind="kmeans", n_modes=50, top_k=20),
    "argo": ModePreset(
        kind="grid",
        n_modes=24,
        top_k=6,
        x_slices=6,
        y_cut_fractions=(0.15, 0.5, 0.85),
    ),
}


# ---------------------------------------------------------------------------
# k-means


def _kmeanspp(X, k, rng):
    idx = int(rng.integers(len(X)))
    centroids = [X[idx]]
    d2 = ((X - X[idx]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            i = int(rng.choice(len(X), p=d2 / total))
        else:
            i = int(rng.integers(len(X)))
        centroids.append(X[i])
        d2 = np.minimum(d2, ((X - X[i]) ** 2).sum(axis=1))
    return np.stack(centroids).astype(float)


def lloyd(points, centroids, max_iter=300):
    """Lloyd iterations to an assignment fixpoint; empty clusters are
    re-seeded from the farthest point. Returns (centroids, labels, wcss)."""
    X = np.asarray(points, dtype=float)
    C = np.asarray(centroids, dtype=float).copy()
    labels = None
    wcss = []
    for _ in range(max_iter):
        D = ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=-1)
        new = D.argmin(axis=1)
        wcss.append(float(D[np.arange(len(X)), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        dist_own = D[np.arange(len(X)), labels]
        for i in range(len(C)):
            members = labels == i
            if members.any():
                C[i] = X[members].mean(axis=0)
            else:
                C[i] = X[int(dist_own.argmax())]
    return C, labels, np.asarray(wcss)


def _mode_stats(X, members):
    pts = X[members]
    centroid = pts.mean(axis=0)
    sigma = pts.std(axis=0) if len(pts) > 1 else np.zeros(2)
    return centroid, sigma


def kmeans_partition(targets, k: int, seed: int = 0) -> ModePartition:
    """Cluster 2D destination targets into k modes (k-means++ then Lloyd)."""
    X = np.asarray(targets, dtype=float)
    if X.ndim != 2 or X.shape[1] != 2:
        raise ValueError("targets must be an (n, 2) array")
    n = len(X)
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < k:
        raise ValueError(f"need at least k={k} targets, got {n}")
    rng = np.random.default_rng(seed)
    C, labels, _ = lloyd(X, _kmeanspp(X, k, rng))
    modes = []
    for i in range(k):
        members = labels == i
        if members.any():
            centroid, sigma = _mode_stats(X, members)
        else:
            centroid, sigma = C[i].copy(), np.zeros(2)
        modes.append(
            Mode(id=i, centroid=centroid, sigma=sigma, count=int(members.sum()))
        )
    return ModePartition(kind="kmeans", modes=tuple(modes), seed=seed)


# ---------------------------------------------------------------------------
# grid partitions


def grid_partition(targets, x_slices: int, y_layout) -> ModePartition:
    """Uniform x columns over the target bounding box with per-column y cuts.

    ``y_layout`` is a list of cut fractions in (0, 1) applied to every
    column, or one such list per column. Boundary points go to the
    lower-index mode.
    """
    X = np.asarray(targets, dtype=float)
    if X.ndim != 2 or X.shape[1] != 2 or len(X) == 0:
        raise ValueError("targets must be a non-empty (n, 2) array")
    if x_slices < 1:
        raise ValueError("x_slices must be >= 1")
    x0, x1 = float(X[:, 0].min()), float(X[:, 0].max())
    y0, y1 = float(X[:, 1].min()), float(X[:, 1].max())
    if x1 <= x0:
        raise ValueError("degenerate extent: zero width along x")

    layout = list(y_layout)
    if not layout or np.isscalar(layout[0]):
        layout = [layout] * x_slices
    if len(layout) != x_slices:
        raise ValueError("y_layout must give cut fractions for every column")
    for cuts in layout:
        arr = np.asarray(cuts, dtype=float)
        if arr.size and (arr.min() <= 0 or arr.max() >= 1 or np.any(np.diff(arr) <= 0)):
            raise ValueError("y cut fractions must be strictly increasing in (0, 1)")

    xs = np.linspace(x0, x1, x_slices + 1)
    rects = []
    for col in range(x_slices):
        ys = [y0] + [y0 + f * (y1 - y0) for f in layout[col]] + [y1]
        for r in range(len(ys) - 1):
            rects.append((xs[col], ys[r], xs[col + 1], ys[r + 1]))

    proto = ModePartition(
        kind="grid",
        modes=tuple(
            Mode(id=i, centroid=np.zeros(2), sigma=np.zeros(2), count=0, rects=(rect,))
            for i, rect in enumerate(rects)
        ),
        extent=(x0, x1, y0, y1),
    )
    labels = assign_modes(proto, X)
    modes = []
    for i, rect in enumerate(rects):
        members = labels == i
        if members.any():
            centroid, sigma = _mode_stats(X, members)
        else:
            centroid = np.array(
                [(rect[0] + rect[2]) / 2.0, (rect[1] + rect[3]) / 2.0]
            )
            sigma = np.zeros(2)
        modes.append(
            Mode(
                id=i,
                centroid=centroid,
                sigma=sigma,
                count=int(members.sum()),
                rects=(rect,),
            )
        )
    return ModePartition(kind="grid", modes=tuple(modes), extent=(x0, x1, y0, y1))


# ---------------------------------------------------------------------------
# assignment


def assign_modes(partition: ModePartition, points) -> np.ndarray:
    """Mode id per point; ties go to the lower id, out-of-extent grid points
    clamp to the nearest rectangle."""
    X = np.atleast_2d(np.asarray(points, dtype=float))
    if len(partition.modes) == 0:
        raise ValueError("partition has no modes")
    if partition.kind == "kmeans":
        C = partition.centroids()
        D = ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=-1)
        return D.argmin(axis=1)
    x0, x1, y0, y1 = partition.extent
    px = np.clip(X[:, 0], x0, x1)
    py = np.clip(X[:, 1], y0, y1)
    out = np.full(len(X), -1, dtype=int)
    for mode in partition.modes:  # id order: first hit wins the boundary tie
        for rx0, ry0, rx1, ry1 in mode.rects:
            hit = (out < 0) & (px >= rx0) & (px <= rx1) & (py >= ry0) & (py <= ry1)
            out[hit] = mode.id
    return out


def assign_mode(partition: ModePartition, point) -> int:
    return int(assign_modes(partition, np.asarray(point, dtype=float)[None, :])[0])


# ---------------------------------------------------------------------------
# small-mode merging


def merge_small_modes(partition: ModePartition, targets, min_members: int):
    """Absorb modes with fewer than ``min_members`` targets into their
    nearest neighbour mode. Returns (new partition, assignments)."""
    X = np.asarray(targets, dtype=float)
    labels = assign_modes(partition, X)
    groups = {m.id: {"members": list(np.nonzero(labels == m.id)[0]), "rects": list(m.rects)}
              for m in partition.modes}

    def centroid_of(gid):
        members = groups[gid]["members"]
        if members:
            return X[members].mean(axis=0)
        return partition.modes[gid].centroid

    changed = True
    while changed and len(groups) > 1:
        changed = False
        small = [g for g in sorted(groups) if len(groups[g]["members"]) < min_members]
        if not small:
            break
        victim = min(small, key=lambda g: (len(groups[g]["members"]), g))
        others = [g for g in sorted(groups) if g != victim]
        vc = centroid_of(victim)
        absorber = min(
            others, key=lambda g: (float(((centroid_of(g) - vc) ** 2).sum()), g)
        )
        warnings.warn(
            f"mode {victim} has {len(groups[victim]['members'])} members "
            f"(< {min_members}); merging into mode {absorber}",
            stacklevel=2,
        )
        groups[absorber]["members"].extend(groups[victim]["members"])
        groups[absorber]["rects"].extend(groups[victim]["rects"])
        del groups[victim]
        changed = True

    new_modes = []
    new_labels = np.full(len(X), -1, dtype=int)
    for new_id, old_id in enumerate(sorted(groups)):
        members = np.asarray(sorted(groups[old_id]["members"]), dtype=int)
        if members.size:
            centroid, sigma = _mode_stats(X, members)
        else:
            centroid, sigma = partition.modes[old_id].centroid, np.zeros(2)
        new_modes.append(
            Mode(
                id=new_id,
                centroid=centroid,
                sigma=sigma,
                count=int(members.size),
                rects=tuple(groups[old_id]["rects"]),
            )
        )
        new_labels[members] = new_id
    return (
        ModePartition(
            kind=partition.kind,
            modes=tuple(new_modes),
            extent=partition.extent,
            seed=partition.seed,
        ),
        new_labels,
    )


def build_preset_partition(preset_name: str, targets, seed: int = 0) -> ModePartition:
    """Partition targets per one of the named dataset presets."""
    if preset_name not in PRESETS:
        raise ValueError(f"unknown mode preset '{preset_name}'")
    preset = PRESETS[preset_name]
    if preset.kind == "kmeans":
        return kmeans_partition(targets, preset.n_modes, seed)
    return grid_partition(targets, preset.x_slices, list(preset.y_cut_fractions))

"""Cyclic gradient boosting of binned shape functions.

A fitted model is a glass-box additive regressor: an intercept, one per-bin
shape function per feature and optionally one 2D grid per selected feature
pair. Prediction is a pure table lookup, so the model is exactly
decomposable term by term.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .binning import BinnedDataset, BinningSchema, apply_bins

_GAIN_EPS = 1e-12


@dataclass(frozen=True)
class EbmHyperparams:
    max_feature_bins: int = 256
    max_interaction_bins: int = 32
    max_rounds: int = 5000
    learning_rate: float = 0.01
    max_leaves: int = 3
    outer_bags: int = 8
    validation_fraction: float = 0.15
    early_stop_patience: int = 50  # 0 disables early stopping
    num_pairs: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_feature_bins < 2:
            raise ValueError("max_feature_bins must be >= 2")
        if self.max_interaction_bins < 2:
            raise ValueError("max_interaction_bins must be >= 2")
        if self.max_leaves < 2:
            raise ValueError("max_leaves must be >= 2")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in (0, 1)")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.outer_bags < 1:
            raise ValueError("outer_bags must be >= 1")
        if self.num_pairs < 0:
            raise ValueError("num_pairs must be >= 0")


@dataclass(frozen=True)
class ShapeFunction:
    feature: int
    values: np.ndarray  # length total_bins (ordered bins + trailing missing bin)
    counts: np.ndarray  # full-training-set bin populations


@dataclass(frozen=True)
class PairShape:
    features: tuple  # (j, k) with j < k
    coarse_j: np.ndarray  # fine bin index -> interaction bin index, feature j
    coarse_k: np.ndarray
    grid: np.ndarray  # (gj, gk) contributions over interaction bins
    counts: np.ndarray  # full-training-set cell populations


@dataclass(frozen=True)
class EbmModel:
    intercept: float
    shapes: tuple
    pairs: tuple
    binning: BinningSchema
    residual_sigma: float
    hyperparams: EbmHyperparams
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# depth-limited trees over ordered bins


def _best_split(counts, sums, lo, hi):
    """Best single cut inside segment [lo, hi); returns (sse_gain, cut)."""
    c = counts[lo:hi]
    s = sums[lo:hi]
    cc = np.cumsum(c)
    sc = np.cumsum(s)
    ct, st = cc[-1], sc[-1]
    if ct == 0 or len(c) < 2:
        return 0.0, -1
    cl = cc[:-1]
    sl = sc[:-1]
    cr = ct - cl
    sr = st - sl
    valid = (cl > 0) & (cr > 0)
    if not valid.any():
        return 0.0, -1
    fit = np.where(
        valid,
        sl**2 / np.maximum(cl, 1) + sr**2 / np.maximum(cr, 1),
        -np.inf,
    )
    i = int(np.argmax(fit))
    return float(fit[i] - st**2 / ct), lo + i + 1


def _fit_ordered_tree(counts, sums, max_leaves):
    """Greedy depth-limited regression tree on ordered bins.

    Returns per-bin leaf means, or all zeros when no split has positive gain
    (a root-only tree carries no information and must not shift the model).
    """
    nb = len(counts)
    values = np.zeros(nb)
    if nb < 2 or counts.sum() == 0:
        return values
    segs = [(0, nb)]
    best = {(0, nb): _best_split(counts, sums, 0, nb)}
    while len(segs) < max_leaves:
        gains = [best[s][0] for s in segs]
        i = int(np.argmax(gains))
        if gains[i] <= _GAIN_EPS:
            break
        lo, hi = segs.pop(i)
        cut = best[(lo, hi)][1]
        for seg in ((lo, cut), (cut, hi)):
            segs.append(seg)
            best[seg] = _best_split(counts, sums, *seg)
    if len(segs) == 1:
        return values
    for lo, hi in segs:
        c = counts[lo:hi].sum()
        if c > 0:
            values[lo:hi] = sums[lo:hi].sum() / c
    return values


# ---------------------------------------------------------------------------
# bagging


def _split_bag(n, hp, rng):
    """Training / validation row indices for one outer bag.

    A single bag trains on the full dataset (no bootstrap) so that the
    bin-mean and monotone-loss guarantees hold exactly; multiple bags use
    bootstrap resampling with validation carved from the out-of-bag rows.
    """
    v = max(1, int(round(hp.validation_fraction * n)))
    if hp.outer_bags == 1:
        if hp.early_stop_patience > 0:
            val = np.sort(rng.choice(n, size=min(v, n - 1), replace=False))
            tr = np.setdiff1d(np.arange(n), val)
        else:
            tr, val = np.arange(n), np.empty(0, dtype=int)
        return tr, val
    tr = np.sort(rng.integers(0, n, size=n))
    oob = np.setdiff1d(np.arange(n), tr)
    if hp.early_stop_patience <= 0:
        val = np.empty(0, dtype=int)
    elif oob.size == 0:
        val = np.sort(rng.choice(n, size=min(v, n - 1), replace=False))
    elif oob.size <= v:
        val = oob
    else:
        val = np.sort(rng.choice(oob, size=v, replace=False))
    return tr, val


# ---------------------------------------------------------------------------
# main-effect fitting


def _boost_shapes(B, y, tr, val, tb, hp, intercept):
    p = B.shape[1]
    Btr = B[tr]
    Bval = B[val]
    resid = y[tr] - intercept
    vresid = y[val] - intercept
    counts = [np.bincount(Btr[:, j], minlength=tb[j]) for j in range(p)]
    values = [np.zeros(tb[j]) for j in range(p)]
    lr = hp.learning_rate
    best = np.inf
    since = 0
    rounds = 0
    history = []
    for _ in range(hp.max_rounds):
        rounds += 1
        for j in range(p):
            nb = tb[j] - 1
            b = Btr[:, j]
            sums = np.bincount(b, weights=resid, minlength=tb[j])
            upd = np.zeros(tb[j])
            upd[:nb] = _fit_ordered_tree(counts[j][:nb], sums[:nb], hp.max_leaves)
            if counts[j][nb] > 0:
                upd[nb] = sums[nb] / counts[j][nb]
            if not upd.any():
                continue
            upd *= lr
            values[j] += upd
            resid -= upd[b]
            if val.size:
                vresid -= upd[Bval[:, j]]
        history.append(float(np.sqrt(np.mean(resid**2))))
        if hp.early_stop_patience > 0 and val.size:
            vr = float(np.sqrt(np.mean(vresid**2)))
            if vr < best - _GAIN_EPS:
                best = vr
                since = 0
            else:
                since += 1
                if since >= hp.early_stop_patience:
                    break
    return values, counts, rounds, history


def fit_main_effects(binned: BinnedDataset, targets, hp: EbmHyperparams) -> EbmModel:
    """Fit the additive main effects by cyclic boosting over outer bags.

    Shapes are population-weighted averages across bags, centered so their
    weighted mean is zero with the centering mass folded into the intercept.
    """
    B = binned.bins
    y = np.asarray(targets, dtype=float)
    n, p = B.shape
    if y.shape != (n,):
        raise ValueError(f"targets must have shape ({n},), got {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    if n < 2:
        raise ValueError("need at least 2 samples to fit")
    schema = binned.schema
    tb = [schema.total_bins(j) for j in range(p)]
    full_counts = [np.bincount(B[:, j], minlength=tb[j]) for j in range(p)]
    base = float(y.mean())

    bag_values = []
    bag_counts = []
    rounds_per_bag = []
    rmse_history = []
    for bag in range(hp.outer_bags):
        rng = np.random.default_rng([hp.rng_seed, 0, bag])
        tr, val = _split_bag(n, hp, rng)
        values, counts, rounds, history = _boost_shapes(B, y, tr, val, tb, hp, base)
        bag_values.append(values)
        bag_counts.append(counts)
        rounds_per_bag.append(rounds)
        rmse_history.append(history)

    intercept = base
    shapes = []
    for j in range(p):
        num = sum(bc[j] * bv[j] for bc, bv in zip(bag_counts, bag_values))
        den = sum(bc[j] for bc in bag_counts)
        unweighted = np.mean([bv[j] for bv in bag_values], axis=0)
        avg = np.where(den > 0, num / np.maximum(den, 1), unweighted)
        w = full_counts[j]
        center = float((w * avg).sum() / w.sum())
        avg = avg - center
        intercept += center
        shapes.append(ShapeFunction(feature=j, values=avg, counts=w))

    model = EbmModel(
        intercept=intercept,
        shapes=tuple(shapes),
        pairs=(),
        binning=schema,
        residual_sigma=0.0,
        hyperparams=hp,
        meta={
            "rounds_per_bag": rounds_per_bag,
            "train_rmse_history": rmse_history,
        },
    )
    resid = y - predict_binned(model, binned)
    return replace(model, residual_sigma=float(resid.std()))


# ---------------------------------------------------------------------------
# prediction


def predict_binned(model: EbmModel, binned: BinnedDataset) -> np.ndarray:
    B = binned.bins
    if B.shape[1] != model.binning.n_features:
        raise ValueError("binned dataset width does not match model")
    out = np.full(B.shape[0], model.intercept)
    for shape in model.shapes:
        out += shape.values[B[:, shape.feature]]
    for pair in model.pairs:
        j, k = pair.features
        out += pair.grid[pair.coarse_j[B[:, j]], pair.coarse_k[B[:, k]]]
    return out


def predict(model: EbmModel, features):
    """Evaluate the additive model; accepts one row (p,) or a matrix (n, p)."""
    X = np.asarray(features, dtype=float)
    single = X.ndim == 1
    binned = apply_bins(model.binning, X)
    out = predict_binned(model, binned)
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# pairwise interactions


def _coarse_map(counts_ordered, max_groups):
    """Monotone mapping of fine ordered bins into <= max_groups balanced groups.

    The trailing entry maps the missing fine bin to its own coarse group.
    """
    nb = len(counts_ordered)
    if nb <= max_groups:
        m = np.arange(nb)
    else:
        total = max(int(counts_ordered.sum()), 1)
        center_mass = np.cumsum(counts_ordered) - counts_ordered / 2.0
        m = np.minimum(
            (center_mass / total * max_groups).astype(int), max_groups - 1
        )
        _, m = np.unique(m, return_inverse=True)
    return np.append(m, (m.max() + 1) if nb else 0).astype(np.int64)


def _pair_tables(cj, ck, resid, gj, gk):
    flat = cj.astype(np.int64) * gk + ck
    cnt = np.bincount(flat, minlength=gj * gk).reshape(gj, gk).astype(float)
    sm = np.bincount(flat, weights=resid, minlength=gj * gk).reshape(gj, gk)
    return cnt, sm


def _best_pair_split(cnt, sm):
    """Best axis-aligned one-cut-per-axis (4-cell) fit to residual tables.

    Returns (sse_gain, row_cut, col_cut, cell_means) or (0, -1, -1, None).
    """
    gj, gk = cnt.shape
    total_c = cnt.sum()
    if total_c == 0 or gj < 2 or gk < 2:
        return 0.0, -1, -1, None
    total_s = sm.sum()
    Pc = np.zeros((gj + 1, gk + 1))
    Ps = np.zeros((gj + 1, gk + 1))
    Pc[1:, 1:] = cnt.cumsum(0).cumsum(1)
    Ps[1:, 1:] = sm.cumsum(0).cumsum(1)
    r = np.arange(1, gj)
    c = np.arange(1, gk)
    a_c = Pc[np.ix_(r, c)]
    a_s = Ps[np.ix_(r, c)]
    top_c = Pc[r, -1][:, None]
    top_s = Ps[r, -1][:, None]
    left_c = Pc[-1, c][None, :]
    left_s = Ps[-1, c][None, :]
    cells_c = (a_c, top_c - a_c, left_c - a_c, total_c - top_c - left_c + a_c)
    cells_s = (a_s, top_s - a_s, left_s - a_s, total_s - top_s - left_s + a_s)
    fit = sum(
        np.where(cc > 0, ss**2 / np.maximum(cc, 1), 0.0)
        for cc, ss in zip(cells_c, cells_s)
    )
    i = int(np.argmax(fit))
    gain = float(fit.flat[i] - total_s**2 / total_c)
    if gain <= _GAIN_EPS:
        return 0.0, -1, -1, None
    ri = r[i // len(c)]
    ci = c[i % len(c)]
    means = np.zeros((2, 2))
    blocks_c = (cells_c[0].flat[i], cells_c[1].flat[i], cells_c[2].flat[i], cells_c[3].flat[i])
    blocks_s = (cells_s[0].flat[i], cells_s[1].flat[i], cells_s[2].flat[i], cells_s[3].flat[i])
    for b, (bc, bs) in enumerate(zip(blocks_c, blocks_s)):
        means[b // 2, b % 2] = bs / bc if bc > 0 else 0.0
    return gain, int(ri), int(ci), means


def pair_score(cj, ck, resid, gj, gk) -> float:
    """SSE reduction of the best 4-cell fit on coarse-binned residuals."""
    cnt, sm = _pair_tables(cj, ck, resid, gj, gk)
    gain, _, _, _ = _best_pair_split(cnt, sm)
    return gain


def _interaction_indices(model, binned, hp):
    """Coarse interaction-bin indices per feature, from full-data populations."""
    B = binned.bins
    schema = binned.schema
    p = B.shape[1]
    maps = []
    for j in range(p):
        counts = np.bincount(B[:, j], minlength=schema.total_bins(j))
        maps.append(_coarse_map(counts[:-1], hp.max_interaction_bins))
    return maps


def detect_interactions(model: EbmModel, binned: BinnedDataset, targets, hp=None):
    """Rank feature pairs by how much a 4-cell split of the main-effect
    residuals reduces their sum of squares. Returns [(pair, score), ...]
    sorted by descending score."""
    hp = hp or model.hyperparams
    B = binned.bins
    p = B.shape[1]
    if p < 2:
        return []
    resid = np.asarray(targets, dtype=float) - predict_binned(model, binned)
    maps = _interaction_indices(model, binned, hp)
    coarse = [maps[j][B[:, j]] for j in range(p)]
    sizes = [int(maps[j].max()) + 1 for j in range(p)]
    scored = []
    for j in range(p):
        for k in range(j + 1, p):
            s = pair_score(coarse[j], coarse[k], resid, sizes[j], sizes[k])
            scored.append(((j, k), s))
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored


def fit_pairs(model: EbmModel, binned: BinnedDataset, targets, pairs, hp=None) -> EbmModel:
    """Cyclic boosting of the selected pair grids on frozen main-effect residuals."""
    hp = hp or model.hyperparams
    if not pairs:
        return model
    B = binned.bins
    n, p = B.shape
    norm = []
    for j, k in pairs:
        if not (0 <= j < p and 0 <= k < p):
            raise ValueError(f"pair ({j}, {k}) out of range for {p} features")
        if j == k:
            raise ValueError(f"pair ({j}, {k}) must name two distinct features")
        t = (min(j, k), max(j, k))
        if t not in norm:
            norm.append(t)
    pairs = norm

    y = np.asarray(targets, dtype=float)
    base_resid = y - predict_binned(model, binned)
    maps = _interaction_indices(model, binned, hp)
    cidx = {jk: (maps[jk[0]][B[:, jk[0]]], maps[jk[1]][B[:, jk[1]]]) for jk in pairs}
    sizes = {jk: (int(maps[jk[0]].max()) + 1, int(maps[jk[1]].max()) + 1) for jk in pairs}
    lr = hp.learning_rate

    bag_grids = []
    bag_counts = []
    for bag in range(hp.outer_bags):
        rng = np.random.default_rng([hp.rng_seed, 1, bag])
        tr, val = _split_bag(n, hp, rng)
        resid = base_resid[tr].copy()
        vresid = base_resid[val].copy()
        grids = {jk: np.zeros(sizes[jk]) for jk in pairs}
        counts = {}
        ctr = {}
        cval = {}
        for jk in pairs:
            cj, ck = cidx[jk]
            ctr[jk] = (cj[tr], ck[tr])
            cval[jk] = (cj[val], ck[val])
            counts[jk], _ = _pair_tables(ctr[jk][0], ctr[jk][1], resid * 0.0, *sizes[jk])
        best = np.inf
        since = 0
        for _ in range(hp.max_rounds):
            for jk in pairs:
                gj, gk = sizes[jk]
                cj, ck = ctr[jk]
                _, sm = _pair_tables(cj, ck, resid, gj, gk)
                gain, ri, ci, means = _best_pair_split(counts[jk], sm)
                if means is None:
                    continue
                upd = np.zeros((gj, gk))
                upd[:ri, :ci] = means[0, 0]
                upd[:ri, ci:] = means[0, 1]
                upd[ri:, :ci] = means[1, 0]
                upd[ri:, ci:] = means[1, 1]
                upd *= lr
                grids[jk] += upd
                resid -= upd[cj, ck]
                if val.size:
                    vj, vk = cval[jk]
                    vresid -= upd[vj, vk]
            if hp.early_stop_patience > 0 and val.size:
                vr = float(np.sqrt(np.mean(vresid**2)))
                if vr < best - _GAIN_EPS:
                    best = vr
                    since = 0
                else:
                    since += 1
                    if since >= hp.early_stop_patience:
                        break
        bag_grids.append(grids)
        bag_counts.append(counts)

    intercept = model.intercept
    pair_shapes = []
    for jk in pairs:
        cj, ck = cidx[jk]
        full_cnt, _ = _pair_tables(cj, ck, np.zeros(n), *sizes[jk])
        num = sum(bc[jk] * bg[jk] for bc, bg in zip(bag_counts, bag_grids))
        den = sum(bc[jk] for bc in bag_counts)
        unweighted = np.mean([bg[jk] for bg in bag_grids], axis=0)
        grid = np.where(den > 0, num / np.maximum(den, 1), unweighted)
        center = float((full_cnt * grid).sum() / full_cnt.sum())
        grid = grid - center
        intercept += center
        pair_shapes.append(
            PairShape(
                features=jk,
                coarse_j=maps[jk[0]],
                coarse_k=maps[jk[1]],
                grid=grid,
                counts=full_cnt,
            )
        )

    out = replace(
        model,
        intercept=intercept,
        pairs=tuple(pair_shapes),
        meta=dict(model.meta, pair_list=[list(jk) for jk in pairs]),
    )
    resid = y - predict_binned(out, binned)
    return replace(out, residual_sigma=float(resid.std()))


def fit_ebm(feature_matrix, targets, hp: EbmHyperparams, names=None) -> EbmModel:
    """Bin, fit main effects, then detect and fit the top ``num_pairs`` pairs."""
    from .binning import bin_dataset

    binned = bin_dataset(feature_matrix, hp.max_feature_bins, names)
    model = fit_main_effects(binned, targets, hp)
    if hp.num_pairs > 0 and binned.bins.shape[1] >= 2:
        ranked = detect_interactions(model, binned, targets, hp)
        chosen = [jk for jk, s in ranked[: hp.num_pairs] if s > _GAIN_EPS]
        if chosen:
            model = fit_pairs(model, binned, targets, chosen, hp)
    return model


# ---------------------------------------------------------------------------
# persistence (versioned JSON; round-trips predictions bit-exactly)

_FORMAT = "glassdest-ebm"
_VERSION = 1


def model_to_dict(model: EbmModel) -> dict:
    return {
        "format": _FORMAT,
        "version": _VERSION,
        "intercept": model.intercept,
        "residual_sigma": model.residual_sigma,
        "hyperparams": {
            "max_feature_bins": model.hyperparams.max_feature_bins,
            "max_interaction_bins": model.hyperparams.max_interaction_bins,
            "max_rounds": model.hyperparams.max_rounds,
            "learning_rate": model.hyperparams.learning_rate,
            "max_leaves": model.hyperparams.max_leaves,
            "outer_bags": model.hyperparams.outer_bags,
            "validation_fraction": model.hyperparams.validation_fraction,
            "early_stop_patience": model.hyperparams.early_stop_patience,
            "num_pairs": model.hyperparams.num_pairs,
            "rng_seed": model.hyperparams.rng_seed,
        },
        "binning": {
            "names": list(model.binning.names),
            "cuts": [c.tolist() for c in model.binning.cuts],
            "vmin": model.binning.vmin.tolist(),
            "vmax": model.binning.vmax.tolist(),
        },
        "shapes": [
            {
                "feature": s.feature,
                "values": s.values.tolist(),
                "counts": s.counts.tolist(),
            }
            for s in model.shapes
        ],
        "pairs": [
            {
                "features": list(pr.features),
                "coarse_j": pr.coarse_j.tolist(),
                "coarse_k": pr.coarse_k.tolist(),
                "grid": pr.grid.tolist(),
                "counts": pr.counts.tolist(),
            }
            for pr in model.pairs
        ],
        "meta": {"rounds_per_bag": list(model.meta.get("rounds_per_bag", []))},
    }


def model_from_dict(d: dict) -> EbmModel:
    if d.get("format") != _FORMAT:
        raise ValueError(f"not a {_FORMAT} document")
    hp = EbmHyperparams(**d["hyperparams"])
    b = d["binning"]
    schema = BinningSchema(
        cuts=tuple(np.asarray(c, dtype=float) for c in b["cuts"]),
        vmin=np.asarray(b["vmin"], dtype=float),
        vmax=np.asarray(b["vmax"], dtype=float),
        names=tuple(b["names"]),
    )
    shapes = tuple(
        ShapeFunction(
            feature=s["feature"],
            values=np.asarray(s["values"], dtype=float),
            counts=np.asarray(s["counts"]),
        )
        for s in d["shapes"]
    )
    pairs = tuple(
        PairShape(
            features=tuple(pr["features"]),
            coarse_j=np.asarray(pr["coarse_j"], dtype=np.int64),
            coarse_k=np.asarray(pr["coarse_k"], dtype=np.int64),
            grid=np.asarray(pr["grid"], dtype=float),
            counts=np.asarray(pr["counts"], dtype=float),
        )
        for pr in d["pairs"]
    )
    return EbmModel(
        intercept=float(d["intercept"]),
        shapes=shapes,
        pairs=pairs,
        binning=schema,
        residual_sigma=float(d["residual_sigma"]),
        hyperparams=hp,
        meta=dict(d.get("meta", {})),
    )


def save_model(model: EbmModel, path) -> None:
    with open(path, "w") as f:
        json.dump(model_to_dict(model), f, sort_keys=True, indent=1)


def load_model(path) -> EbmModel:
    with open(path) as f:
        return model_from_dict(json.load(f))

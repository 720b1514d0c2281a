"""Command-line surface: synth, train, predict, evaluate, explain, inspect.

All subcommands are driven by one JSON config (see configs/ for the dataset
presets) and are deterministic given the config seed.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import dataio, evaluation, explain as explain_mod
from .config import RunConfig, load_config
from .features import build_features, observation_frame
from .modes import build_preset_partition, grid_partition, kmeans_partition, merge_small_modes
from .predictor import (
    load_predictor,
    predict_top_k,
    save_predictor,
    train_multimodal,
)
from .synth import generate_synthetic


def _load_split_spec(cfg: RunConfig):
    spec = cfg.split
    if "name" in spec:
        if "file" not in spec:
            raise ValueError(f"named split '{spec['name']}' needs a 'file' path")
        return dataio.load_scene_split(spec["file"])
    return spec


def _neighbor_states(record, records_by_scene, history_len, dt):
    """Scene-frame (x, y, vx, vy) of every other agent at the ego's last
    observed frame."""
    last_frame = int(record.frames[history_len - 1])
    states = []
    for other in records_by_scene.get(record.scene_id, ()):
        if other.agent_id == record.agent_id:
            continue
        hits = np.nonzero(other.frames == last_frame)[0]
        if hits.size == 0 or hits[0] == 0:
            continue
        i = int(hits[0])
        pos = other.positions[i]
        vel = (pos - other.positions[i - 1]) / dt
        states.append([pos[0], pos[1], vel[0], vel[1]])
    return np.asarray(states, dtype=float).reshape(-1, 4)


def _collect_samples(records, cfg: RunConfig, require_future: bool):
    """Frames and canonical targets for every usable record."""
    need = cfg.history_len + (cfg.horizon_len if require_future else 0)
    samples = []
    for r in records:
        if len(r) < need:
            continue
        if cfg.include_classes and r.agent_class not in cfg.include_classes:
            continue
        obs = r.window(0, cfg.history_len)
        frame, _ = observation_frame(obs, cfg.history_len)
        target = None
        if require_future:
            endpoint = r.positions[cfg.history_len + cfg.horizon_len - 1]
            target = frame.apply(endpoint)
        samples.append({"record": r, "obs": obs, "frame": frame, "target": target})
    if not samples:
        raise ValueError("no records satisfy the configured history/horizon length")
    return samples


def _load_grid(cfg: RunConfig):
    if cfg.schema != "argo" or cfg.grid_path is None:
        return None
    if cfg.grid_meta_path is None:
        raise ValueError("grid raster given without its JSON sidecar")
    return dataio.load_drivable_grid(cfg.grid_path, cfg.grid_meta_path)


def _build_feature_matrix(samples, cfg: RunConfig, partitions, records_by_scene, grid):
    rows = []
    names = None
    for s in samples:
        kwargs = {}
        if cfg.schema == "argo":
            kwargs["neighbor_states"] = _neighbor_states(
                s["record"], records_by_scene, cfg.history_len, cfg.timestep
            )
            kwargs["grid"] = grid
            kwargs["partition"] = partitions[s["record"].agent_class]
            kwargs["poc_default"] = cfg.poc_default
        _, fv = build_features(
            s["obs"], cfg.schema, history_len=cfg.history_len, **kwargs
        )
        rows.append(fv.values)
        names = fv.names
    return np.vstack(rows), names


def _group_by_scene(records):
    by_scene = {}
    for r in records:
        by_scene.setdefault(r.scene_id, []).append(r)
    return by_scene


def _prepare_training(cfg: RunConfig):
    records = dataio.load_records(cfg.data_path, cfg.timestep)
    train, val, _ = evaluation.split_dataset(records, _load_split_spec(cfg), cfg.seed)
    samples = _collect_samples(train + val, cfg, require_future=True)
    targets = np.vstack([s["target"] for s in samples])
    bounds = cfg.outlier_bounds or evaluation.derive_bounds(
        targets, cfg.outlier_coverage
    )
    keep, removed = evaluation.filter_outliers(targets, bounds)
    samples = [s for s, k in zip(samples, keep) if k]
    targets = targets[keep]
    classes = np.array([s["record"].agent_class for s in samples])

    partitions = {}
    for c in sorted(set(classes.tolist())):
        tc = targets[classes == c]
        if cfg.modes is not None:
            if cfg.modes["kind"] == "kmeans":
                part = kmeans_partition(tc, cfg.modes["k"], cfg.seed)
            else:
                part = grid_partition(
                    tc, cfg.modes["x_slices"], cfg.modes["y_cut_fractions"]
                )
        else:
            part = build_preset_partition(cfg.preset, tc, cfg.seed)
        part, _ = merge_small_modes(part, tc, cfg.min_mode_members)
        partitions[c] = part

    grid = _load_grid(cfg)
    X, names = _build_feature_matrix(
        samples, cfg, partitions, _group_by_scene(train + val), grid
    )
    return samples, X, names, targets, classes, partitions, removed


def cmd_train(cfg: RunConfig) -> int:
    _, X, names, targets, classes, partitions, removed = _prepare_training(cfg)
    predictor = train_multimodal(
        X,
        targets,
        classes,
        schema=cfg.schema,
        hyperparams=cfg.hyperparams,
        weights=cfg.weights,
        preset=cfg.preset,
        partitions=partitions,
        top_k=cfg.resolved_top_k(),
        min_mode_members=cfg.min_mode_members,
        feature_names=names,
    )
    Path(cfg.model_path).parent.mkdir(parents=True, exist_ok=True)
    save_predictor(predictor, cfg.model_path)
    print(
        f"trained {len(predictor.classes)} class(es) on {len(targets)} samples "
        f"(outliers removed: {removed:.6%}); model written to {cfg.model_path}"
    )
    return 0


def _predict_samples(cfg: RunConfig, require_future: bool, k: int | None):
    predictor = load_predictor(cfg.model_path)
    records = dataio.load_records(cfg.data_path, cfg.timestep)
    if require_future:
        _, _, test = evaluation.split_dataset(records, _load_split_spec(cfg), cfg.seed)
        if not test:
            test = records
        pool = test
    else:
        pool = records
    samples = _collect_samples(pool, cfg, require_future=require_future)
    samples = [s for s in samples if s["record"].agent_class in predictor.classes]
    if not samples:
        raise ValueError("no samples with a trained agent class")
    partitions = {c: cm.partition for c, cm in predictor.classes.items()}
    grid = _load_grid(cfg)
    X, _ = _build_feature_matrix(
        samples, cfg, partitions, _group_by_scene(pool), grid
    )
    preds = []
    for i, s in enumerate(samples):
        p = predict_top_k(
            predictor, X[i], s["record"].agent_class, k=k, frame=s["frame"]
        )
        preds.append(p)
    return predictor, samples, preds


def cmd_predict(cfg: RunConfig, k: int | None) -> int:
    _, samples, preds = _predict_samples(cfg, require_future=False, k=k)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "predictions.csv"
    with open(out_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["sample_id", "rank", "x", "y", "probability"])
        for s, p in zip(samples, preds):
            scene_pts = s["frame"].invert(p.points)
            sid = f"{s['record'].scene_id}/{s['record'].agent_id}"
            for rank, (pt, prob) in enumerate(zip(scene_pts, p.probabilities), 1):
                w.writerow(
                    [sid, rank, repr(float(pt[0])), repr(float(pt[1])), repr(float(prob))]
                )
    print(f"wrote {len(preds)} prediction sets to {out_path}")
    return 0


def cmd_evaluate(cfg: RunConfig, k: int | None) -> int:
    _, samples, preds = _predict_samples(cfg, require_future=True, k=k)
    gt = np.vstack(
        [
            s["record"].positions[cfg.history_len + cfg.horizon_len - 1]
            for s in samples
        ]
    )
    scene_preds = [s["frame"].invert(p.points) for s, p in zip(samples, preds)]
    classes = [s["record"].agent_class for s in samples]
    report = evaluation.min_fde(scene_preds, gt, classes=classes, k=k)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "eval_report.json", "w") as f:
        json.dump(report.to_dict(), f, sort_keys=True, indent=1)
    print(f"samples: {report.n_samples}")
    print(f"minFDE@{report.k}: {report.min_fde:.4f}")
    for c, v in sorted(report.per_class.items()):
        print(f"  {c}: {v:.4f}")
    return 0


def cmd_explain(cfg: RunConfig, svg: bool, sample_index: int, top_terms: int) -> int:
    predictor = load_predictor(cfg.model_path)
    records = dataio.load_records(cfg.data_path, cfg.timestep)
    samples = _collect_samples(records, cfg, require_future=False)
    samples = [s for s in samples if s["record"].agent_class in predictor.classes]
    partitions = {c: cm.partition for c, cm in predictor.classes.items()}
    grid = _load_grid(cfg)
    X, _ = _build_feature_matrix(
        samples, cfg, partitions, _group_by_scene(records), grid
    )
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    classes = np.array([s["record"].agent_class for s in samples])
    for c, cm in sorted(predictor.classes.items()):
        Xc = X[classes == c]
        if len(Xc) == 0:
            continue
        for axis, model in (("x", cm.global_x), ("y", cm.global_y)):
            rep = explain_mod.global_importance(model, Xc)
            path = out_dir / f"importance_{c}_{axis}.csv"
            explain_mod.write_importance_csv(rep, path)
            if svg:
                explain_mod.render_importance_svg(
                    rep, path.with_suffix(".svg"), title=f"{c} / {axis}"
                )
            best = np.argsort(-rep.values)[: max(top_terms, 1)]
            for t in best:
                if t >= len(model.shapes):
                    continue
                curve = explain_mod.partial_dependence(model, int(t))
                cpath = out_dir / f"dependence_{c}_{axis}_{curve.term}.csv"
                explain_mod.write_dependence_csv(curve, cpath)
                if svg:
                    explain_mod.render_dependence_svg(curve, cpath.with_suffix(".svg"))
        # per-axis importances averaged into one report
        rx = explain_mod.global_importance(cm.global_x, Xc)
        ry = explain_mod.global_importance(cm.global_y, Xc)
        shared = sorted(set(rx.terms) & set(ry.terms))
        mean_vals = np.array(
            [
                (rx.values[rx.terms.index(t)] + ry.values[ry.terms.index(t)]) / 2.0
                for t in shared
            ]
        )
        explain_mod.write_importance_csv(
            explain_mod.ImportanceReport(terms=tuple(shared), values=mean_vals),
            out_dir / f"importance_{c}_mean.csv",
        )
    if 0 <= sample_index < len(samples):
        c = samples[sample_index]["record"].agent_class
        cm = predictor.classes[c]
        for axis, model in (("x", cm.global_x), ("y", cm.global_y)):
            expl = explain_mod.local_explain(model, X[sample_index])
            explain_mod.write_local_csv(expl, out_dir / f"local_{axis}.csv")
    print(f"explanation exports written to {out_dir}")
    return 0


def cmd_inspect(cfg: RunConfig) -> int:
    predictor = load_predictor(cfg.model_path)
    print(f"schema: {predictor.schema}   top_k: {predictor.top_k}")
    print(f"features: {len(predictor.feature_names)}")
    for c, cm in sorted(predictor.classes.items()):
        part = cm.partition
        print(
            f"class '{c}': {len(part.modes)} modes ({part.kind}), "
            f"sigma_all=({cm.global_x.residual_sigma:.4f}, "
            f"{cm.global_y.residual_sigma:.4f}), "
            f"lambda3={cm.lambda3:.3f}"
        )
        for m in part.modes:
            print(
                f"  mode {m.id}: centroid=({m.centroid[0]:.2f}, {m.centroid[1]:.2f}) "
                f"members={m.count}"
            )
    return 0


def cmd_synth(cfg: RunConfig) -> int:
    if cfg.synth is None:
        raise ValueError("config has no 'synth' section")
    records, _, labels = generate_synthetic(cfg.synth)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "synthetic.csv"
    dataio.write_trajectory_csv(out_path, records)
    with open(out_dir / "synthetic_modes.json", "w") as f:
        json.dump({r.agent_id: int(m) for r, m in zip(records, labels)}, f, indent=1)
    print(f"wrote {len(records)} synthetic tracks to {out_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glassdest",
        description="Glass-box multi-modal traffic destination prediction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("train", "fit the multi-modal predictor"),
        ("predict", "emit top-K destination predictions"),
        ("evaluate", "compute minFDE against held-out endpoints"),
        ("explain", "export importance / dependence / local CSVs"),
        ("inspect", "print a model summary"),
        ("synth", "generate a synthetic trajectory dataset"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the run config JSON")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--k", type=int, default=None, help="override top-K")
        if name == "explain":
            p.add_argument("--svg", action="store_true", help="also render SVG plots")
            p.add_argument("--sample", type=int, default=0, help="sample for local explanation")
            p.add_argument("--top-terms", type=int, default=6, help="dependence curves per axis")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
            cfg = replace(
                cfg, hyperparams=replace(cfg.hyperparams, rng_seed=args.seed)
            )
            if cfg.synth is not None:
                cfg = replace(cfg, synth=replace(cfg.synth, seed=args.seed))
        if args.out is not None:
            cfg = replace(cfg, out_dir=args.out)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "predict":
            return cmd_predict(cfg, args.k)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.k)
        if args.command == "explain":
            return cmd_explain(cfg, args.svg, args.sample, args.top_terms)
        if args.command == "inspect":
            return cmd_inspect(cfg)
        if args.command == "synth":
            return cmd_synth(cfg)
        raise ValueError(f"unknown command '{args.command}'")
    except Exception as exc:  # one-line diagnostic, nonzero exit
        print(f"glassdest {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

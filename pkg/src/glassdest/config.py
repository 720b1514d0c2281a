"""Run configuration: one JSON file drives every CLI subcommand.

All randomness in a run flows from the single ``seed`` field.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .ebm import EbmHyperparams
from .modes import PRESETS
from .predictor import ScoringWeights
from .synth import SynthSpec


@dataclass(frozen=True)
class RunConfig:
    schema: str = "sdd"
    preset: str = "sdd"
    seed: int = 0
    top_k: int | None = None
    history_len: int = 8
    horizon_len: int = 12
    timestep: float = 0.4
    min_mode_members: int = 20
    poc_default: float = 0.0
    hyperparams: EbmHyperparams = field(default_factory=EbmHyperparams)
    weights: ScoringWeights = field(default_factory=ScoringWeights)
    outlier_bounds: tuple | None = None  # ((x_lo, x_hi), (y_lo, y_hi))
    outlier_coverage: float = 0.99995  # used when bounds are not given
    split: dict = field(default_factory=lambda: {"fractions": [0.8, 0.1, 0.1]})
    data_path: str = "data"
    grid_path: str | None = None
    grid_meta_path: str | None = None
    model_path: str = "model.json"
    out_dir: str = "out"
    include_classes: tuple | None = None  # None = all classes in the data
    modes: dict | None = None  # overrides the preset partition, e.g. {"kind": "kmeans", "k": 4}
    synth: SynthSpec | None = None

    def resolved_top_k(self) -> int:
        if self.top_k is not None:
            return self.top_k
        return PRESETS[self.preset].top_k if self.preset in PRESETS else 1


def _pop(d: dict, key, default=None):
    return d.pop(key) if key in d else default


def config_from_dict(raw: dict, base_dir: Path | None = None) -> RunConfig:
    d = dict(raw)
    hp = EbmHyperparams(**_pop(d, "hyperparams", {}))
    weights = ScoringWeights(**_pop(d, "weights", {}))
    bounds = _pop(d, "outlier_bounds")
    if bounds is not None:
        bounds = (tuple(bounds["x"]), tuple(bounds["y"]))
    synth_raw = _pop(d, "synth")
    synth = None
    if synth_raw is not None:
        synth_raw = dict(synth_raw)
        synth_raw["destinations"] = tuple(
            tuple(p) for p in synth_raw.get("destinations", ())
        )
        synth_raw["weights"] = tuple(synth_raw.get("weights", ()))
        for key in ("speed_range", "start_box"):
            if key in synth_raw:
                synth_raw[key] = tuple(synth_raw[key])
        synth = SynthSpec(**synth_raw)
    paths = _pop(d, "paths", {})
    include = _pop(d, "include_classes")
    cfg = RunConfig(
        hyperparams=hp,
        weights=weights,
        outlier_bounds=bounds,
        synth=synth,
        include_classes=tuple(include) if include else None,
        data_path=paths.get("data", "data"),
        grid_path=paths.get("grid"),
        grid_meta_path=paths.get("grid_meta"),
        model_path=paths.get("model", "model.json"),
        out_dir=paths.get("out", "out"),
        **d,
    )
    if base_dir is not None:
        cfg = _resolve_paths(cfg, base_dir)
    # the single seed drives every component RNG
    if cfg.hyperparams.rng_seed != cfg.seed:
        cfg = replace(cfg, hyperparams=replace(cfg.hyperparams, rng_seed=cfg.seed))
    if cfg.synth is not None and cfg.synth.seed != cfg.seed:
        cfg = replace(cfg, synth=replace(cfg.synth, seed=cfg.seed))
    return cfg


def _resolve_paths(cfg: RunConfig, base: Path) -> RunConfig:
    def res(p):
        if p is None:
            return None
        p = Path(p)
        return str(p if p.is_absolute() else base / p)

    split = dict(cfg.split)
    if "file" in split:
        split["file"] = res(split["file"])
    return replace(
        cfg,
        data_path=res(cfg.data_path),
        grid_path=res(cfg.grid_path),
        grid_meta_path=res(cfg.grid_meta_path),
        model_path=res(cfg.model_path),
        out_dir=res(cfg.out_dir),
        split=split,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    with open(path) as f:
        raw = json.load(f)
    return config_from_dict(raw, base_dir=path.parent)

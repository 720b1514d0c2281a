"""Synthetic multi-destination trajectory generator.

Agents travel with a random scene heading; the destination is drawn from a
set of modes expressed in the agent's canonical frame, so the canonical
targets cluster at the mode points exactly regardless of scene pose. With
"turn" kinematics the observed history carries no information about the
sampled mode, which makes the conditional target genuinely multi-modal.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import TrajectoryRecord


@dataclass(frozen=True)
class SynthSpec:
    destinations: tuple  # mode destinations, canonical units, ((x, y), ...)
    weights: tuple  # sampling probability per mode, sums to 1
    noise_sigma: float = 0.5
    n: int = 1000
    seed: int = 0
    kinematics: str = "turn"  # "turn" | "straight"
    history_len: int = 8
    horizon_len: int = 12
    timestep: float = 0.4
    speed_range: tuple = (0.8, 1.6)
    start_box: tuple = (-50.0, 50.0)  # uniform start positions per axis
    agent_class: str = "pedestrian"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(w) != len(self.destinations):
            raise ValueError("one weight per destination mode required")
        if w.min() < 0 or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("mode weights must be nonnegative and sum to 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if self.kinematics not in ("turn", "straight"):
            raise ValueError(f"unknown kinematics '{self.kinematics}'")


def generate_synthetic(spec: SynthSpec):
    """Returns (records, scene_targets (n, 2), mode_labels (n,)).

    Each record holds ``history_len`` observed steps followed by
    ``horizon_len`` future steps; the last future position is the target.
    """
    rng = np.random.default_rng(spec.seed)
    dests = np.asarray(spec.destinations, dtype=float)
    labels = rng.choice(len(dests), size=spec.n, p=np.asarray(spec.weights, dtype=float))
    records = []
    targets = np.empty((spec.n, 2))
    dt = spec.timestep
    h, f = spec.history_len, spec.horizon_len
    for i in range(spec.n):
        start = rng.uniform(spec.start_box[0], spec.start_box[1], size=2)
        theta = rng.uniform(-np.pi, np.pi)
        speed = rng.uniform(*spec.speed_range)
        u = np.array([np.cos(theta), np.sin(theta)])
        hist = start + np.outer(np.arange(h) * speed * dt, u)
        last = hist[-1]
        noise = rng.normal(0.0, spec.noise_sigma, size=2)
        canon_dest = dests[labels[i]] + noise
        c, s = np.cos(theta), np.sin(theta)
        endpoint = last + np.array(
            [c * canon_dest[0] - s * canon_dest[1], s * canon_dest[0] + c * canon_dest[1]]
        )
        frac = np.arange(1, f + 1) / f
        if spec.kinematics == "straight":
            future = last + np.outer(frac, endpoint - last)
        else:
            # quadratic Bezier: keep the initial heading, then bend to the goal
            ctrl = last + u * 0.5 * float(np.linalg.norm(endpoint - last))
            future = (
                np.outer((1 - frac) ** 2, last)
                + np.outer(2 * frac * (1 - frac), ctrl)
                + np.outer(frac**2, endpoint)
            )
        pts = np.vstack([hist, future])
        t = h + f
        records.append(
            TrajectoryRecord(
                agent_id=f"agent_{i}",
                agent_class=spec.agent_class,
                frames=np.arange(t),
                positions=pts,
                headings=np.full(t, np.nan),
                width=0.5,
                length=0.5,
                lost=np.zeros(t, dtype=bool),
                occluded=np.zeros(t, dtype=bool),
                generated=np.zeros(t, dtype=bool),
                timestep=dt,
                scene_id=f"synth_{i % 8}",
            )
        )
        targets[i] = endpoint
    return records, targets, labels

import numpy as np
import pytest

from glassdest import EbmHyperparams, TrajectoryRecord


def quick_hp(**kw):
    """Small-budget hyperparameters for desk-scale fits."""
    base = dict(
        max_feature_bins=32,
        max_rounds=200,
        learning_rate=0.1,
        outer_bags=1,
        early_stop_patience=0,
        num_pairs=0,
        rng_seed=0,
    )
    base.update(kw)
    return EbmHyperparams(**base)


def make_record(positions, agent_class="pedestrian", headings=None, timestep=0.4,
                width=0.5, length=0.5, lost=None, occluded=None, generated=None,
                agent_id="a0", scene_id="s0"):
    pts = np.asarray(positions, dtype=float)
    t = len(pts)
    flags = lambda v: np.asarray(v, dtype=bool) if v is not None else np.zeros(t, dtype=bool)
    return TrajectoryRecord(
        agent_id=agent_id,
        agent_class=agent_class,
        frames=np.arange(t),
        positions=pts,
        headings=np.asarray(headings, dtype=float) if headings is not None else np.full(t, np.nan),
        width=width,
        length=length,
        lost=flags(lost),
        occluded=flags(occluded),
        generated=flags(generated),
        timestep=timestep,
        scene_id=scene_id,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(0)

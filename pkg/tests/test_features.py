import numpy as np
import pytest

from glassdest import (
    DrivableGrid,
    FeatureError,
    Mode,
    ModePartition,
    build_features,
    canonicalize,
    poc_features,
    road_mode_centers,
)

from conftest import make_record


# ---------------------------------------------------------------------------
# canonical frame


def test_canonicalize_identity():
    history = np.array([[-2.0, 0.0], [-1.0, 0.0], [0.0, 0.0]])
    frame, transformed = canonicalize(history)
    np.testing.assert_allclose(transformed, history, atol=1e-12)
    np.testing.assert_allclose(frame.origin, [0.0, 0.0])
    assert frame.angle == pytest.approx(0.0)


def test_canonicalize_hand_computed():
    # last point (5,5), heading pi/2: translate by (-5,-5), rotate by -pi/2;
    # the point (5,6) lands at (1,0)
    history = np.array([[5.0, 4.0], [5.0, 5.0]])
    frame, transformed = canonicalize(history, heading=np.pi / 2)
    np.testing.assert_allclose(frame.apply([5.0, 6.0]), [1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(transformed[-1], [0.0, 0.0], atol=1e-12)


def test_canonicalize_roundtrip(rng):
    pts = rng.normal(size=(10, 2)) * 20
    frame, transformed = canonicalize(pts)
    np.testing.assert_allclose(frame.invert(transformed), pts, atol=1e-9)


def test_canonicalize_needs_heading_for_single_point():
    with pytest.raises(ValueError):
        canonicalize(np.zeros((1, 2)))
    frame, _ = canonicalize(np.zeros((1, 2)), heading=1.0)
    assert frame.angle == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# schema feature vectors


def test_stationary_agent_features():
    r = make_record(np.zeros((8, 2)))
    _, fv = build_features(r, "sdd")
    d = dict(zip(fv.names, fv.values))
    for i in range(1, 8):
        assert d[f"rel_x_{i}"] == 0.0
        assert d[f"rel_y_{i}"] == 0.0


def test_flag_sums_count_the_window():
    r = make_record(np.zeros((8, 2)), occluded=np.ones(8, dtype=bool))
    _, fv = build_features(r, "sdd")
    d = dict(zip(fv.names, fv.values))
    assert d["occluded_sum"] == 8.0
    assert d["lost_sum"] == 0.0
    for k in ("lost_sum", "occluded_sum", "generated_sum"):
        assert d[k] == int(d[k]) and 0 <= d[k] <= 8


def test_constant_velocity_features():
    # finite-difference oracle on a synthesized constant-speed track
    v, dt = 1.5, 0.4
    theta = 0.7
    u = np.array([np.cos(theta), np.sin(theta)])
    pts = np.outer(np.arange(8) * v * dt, u) + np.array([3.0, -2.0])
    r = make_record(pts, timestep=dt)
    _, fv = build_features(r, "ind")
    d = dict(zip(fv.names, fv.values))
    for i in range(1, 9):
        assert d[f"rel_x_{i}"] == pytest.approx(-(8 - i) * v * dt, abs=1e-9)
        assert d[f"rel_y_{i}"] == pytest.approx(0.0, abs=1e-9)
    assert d["speed"] == pytest.approx(v)
    assert d["accel"] == pytest.approx(0.0, abs=1e-9)


def test_insufficient_history_is_an_error():
    r = make_record(np.zeros((5, 2)))
    with pytest.raises(FeatureError, match="5"):
        build_features(r, "sdd")


def test_unknown_schema_rejected():
    r = make_record(np.zeros((8, 2)))
    with pytest.raises(FeatureError):
        build_features(r, "nope")


# ---------------------------------------------------------------------------
# collision-point features


def test_poc_empty_scene_returns_defaults():
    out = poc_features([0.0, 0.0], 0.0, 1.0, np.empty((0, 4)), default=3.25)
    np.testing.assert_allclose(out, 3.25)


def test_poc_head_on():
    # ego at origin heading +x speed 1, neighbour closing from (10, 0):
    # they meet halfway
    out = poc_features([0.0, 0.0], 0.0, 1.0, [[10.0, 0.0, -1.0, 0.0]], default=0.0)
    assert out[0] == pytest.approx(5.0, abs=1e-9)


def test_poc_crossing_at_right_angle():
    # neighbour at (5,-5) moving +y crosses the forward ray at (5, 0)
    out = poc_features([0.0, 0.0], 0.0, 1.0, [[5.0, -5.0, 0.0, 1.0]], default=-1.0)
    assert out[0] == pytest.approx(5.0, abs=1e-9)


def test_poc_parallel_never_crosses():
    out = poc_features([0.0, 0.0], 0.0, 1.0, [[5.0, 5.0, 1.0, 0.0]], default=9.0)
    np.testing.assert_allclose(out, 9.0)


def test_poc_mirror_symmetry(rng):
    # reflecting the scene across the heading axis swaps left/right and
    # keeps forward/backward
    for _ in range(20):
        nbrs = rng.normal(size=(4, 4)) * np.array([10, 10, 1, 1])
        mirrored = nbrs * np.array([1.0, -1.0, 1.0, -1.0])
        a = poc_features([0, 0], 0.0, 1.2, nbrs, default=0.0)
        b = poc_features([0, 0], 0.0, 1.2, mirrored, default=0.0)
        assert a[0] == pytest.approx(b[0], abs=1e-9)  # forward
        assert a[2] == pytest.approx(b[2], abs=1e-9)  # backward
        assert a[1] == pytest.approx(b[3], abs=1e-9)  # left <-> right
        assert a[3] == pytest.approx(b[1], abs=1e-9)


# ---------------------------------------------------------------------------
# drivable-area centers


def _mode(rects):
    return ModePartition(
        kind="grid",
        modes=tuple(
            Mode(id=i, centroid=np.zeros(2), sigma=np.zeros(2), count=0, rects=(r,))
            for i, r in enumerate(rects)
        ),
        extent=(0.0, 2.0, 0.0, 2.0),
    )


def test_road_center_uniform_grid():
    grid = DrivableGrid(
        occupancy=np.ones((4, 4), dtype=bool), cell_size=0.5, origin=np.zeros(2)
    )
    centers = road_mode_centers(grid, _mode([(0.0, 0.0, 2.0, 2.0)]))
    np.testing.assert_allclose(centers[0], [1.0, 1.0], atol=1e-12)


def test_road_center_empty_area_is_zero_tuple():
    grid = DrivableGrid(
        occupancy=np.zeros((4, 4), dtype=bool), cell_size=0.5, origin=np.zeros(2)
    )
    centers = road_mode_centers(grid, _mode([(0.0, 0.0, 2.0, 2.0)]))
    np.testing.assert_allclose(centers[0], [0.0, 0.0])


def test_road_center_half_drivable():
    occ = np.zeros((4, 4), dtype=bool)
    occ[:, :2] = True  # drivable where x < 1
    grid = DrivableGrid(occupancy=occ, cell_size=0.5, origin=np.zeros(2))
    centers = road_mode_centers(grid, _mode([(0.0, 0.0, 2.0, 2.0)]))
    assert centers[0][0] == pytest.approx(0.5, abs=0.5)
    assert centers[0][1] == pytest.approx(1.0, abs=0.5)


# ---------------------------------------------------------------------------
# rigid-transform invariance


def _rigid(record, angle, shift):
    c, s = np.cos(angle), np.sin(angle)
    R = np.array([[c, -s], [s, c]])
    return make_record(
        record.positions @ R.T + shift,
        timestep=record.timestep,
        occluded=record.occluded,
    )


def test_feature_vector_rigid_invariance(rng):
    pts = np.cumsum(rng.normal(size=(8, 2)) * 0.3 + np.array([0.5, 0.1]), axis=0)
    r = make_record(pts, occluded=rng.random(8) < 0.3)
    _, base = build_features(r, "sdd")
    for _ in range(25):
        angle = rng.uniform(-np.pi, np.pi)
        shift = rng.uniform(-100, 100, size=2)
        _, fv = build_features(_rigid(r, angle, shift), "sdd")
        np.testing.assert_allclose(fv.values, base.values, atol=1e-6)


def test_argo_features_rigid_invariance(rng):
    pts = np.cumsum(np.tile([0.4, 0.2], (8, 1)) + rng.normal(size=(8, 2)) * 0.05, axis=0)
    r = make_record(pts, agent_class="car")
    nbrs = rng.normal(size=(3, 4)) * np.array([8, 8, 1, 1])
    occ = rng.random((10, 10)) < 0.6
    grid = DrivableGrid(occupancy=occ, cell_size=0.5, origin=np.array([-2.0, -2.0]))
    part = _mode([(-2.0, -2.0, 1.0, 1.0), (1.0, -2.0, 3.0, 3.0)])
    _, base = build_features(
        r, "argo", neighbor_states=nbrs, grid=grid, partition=part, poc_default=0.5
    )
    for _ in range(10):
        angle = rng.uniform(-np.pi, np.pi)
        shift = rng.uniform(-50, 50, size=2)
        c, s = np.cos(angle), np.sin(angle)
        R = np.array([[c, -s], [s, c]])
        nbrs_t = np.hstack([nbrs[:, :2] @ R.T + shift, nbrs[:, 2:] @ R.T])
        grid_t = DrivableGrid(
            occupancy=occ,
            cell_size=0.5,
            origin=R @ grid.origin + shift,
            rotation=grid.rotation + angle,
        )
        _, fv = build_features(
            _rigid(r, angle, shift),
            "argo",
            neighbor_states=nbrs_t,
            grid=grid_t,
            partition=part,
            poc_default=0.5,
        )
        np.testing.assert_allclose(fv.values, base.values, atol=1e-6)

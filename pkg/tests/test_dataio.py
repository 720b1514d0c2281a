import numpy as np
import pytest

from glassdest import DrivableGrid, SynthSpec, generate_synthetic
from glassdest.dataio import (
    DataFormatError,
    load_drivable_grid,
    load_records,
    parse_trajectory_csv,
    save_drivable_grid,
    write_trajectory_csv,
)

from conftest import make_record


def _spec(**kw):
    base = dict(
        destinations=((10.0, 10.0), (10.0, -10.0)),
        weights=(0.5, 0.5),
        noise_sigma=0.5,
        n=50,
        seed=0,
    )
    base.update(kw)
    return SynthSpec(**base)


# ---------------------------------------------------------------------------
# trajectory CSV


def test_csv_roundtrip(tmp_path):
    records, _, _ = generate_synthetic(_spec(n=12))
    path = tmp_path / "scene.csv"
    write_trajectory_csv(path, records)
    back = parse_trajectory_csv(path)
    assert len(back) == 12
    by_id = {r.agent_id: r for r in back}
    for r in records:
        b = by_id[r.agent_id]
        np.testing.assert_array_equal(b.positions, r.positions)
        np.testing.assert_array_equal(b.frames, r.frames)
        assert b.agent_class == r.agent_class
        assert b.width == r.width
        assert np.all(np.isnan(b.headings))  # empty cells stay unknown


def test_missing_column_named_in_error(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("frame,track_id,class,x,y,width,length,lost,occluded,generated\n")
    with pytest.raises(DataFormatError, match="heading"):
        parse_trajectory_csv(path)


def test_non_numeric_cell_reports_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(
        "frame,track_id,class,x,y,heading,width,length,lost,occluded,generated\n"
        "0,a,car,1.0,2.0,,1,1,0,0,0\n"
        "1,a,car,oops,2.0,,1,1,0,0,0\n"
    )
    with pytest.raises(DataFormatError, match="row 3"):
        parse_trajectory_csv(path)


def test_non_uniform_frames_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(
        "frame,track_id,class,x,y,heading,width,length,lost,occluded,generated\n"
        "0,a,car,1.0,2.0,,1,1,0,0,0\n"
        "1,a,car,1.1,2.0,,1,1,0,0,0\n"
        "5,a,car,1.2,2.0,,1,1,0,0,0\n"
    )
    with pytest.raises(DataFormatError, match="non-uniform"):
        parse_trajectory_csv(path)


def test_empty_file_warns(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.warns(UserWarning, match="empty"):
        assert parse_trajectory_csv(path) == []


def test_load_records_from_directory(tmp_path):
    a, _, _ = generate_synthetic(_spec(n=3, seed=1))
    b, _, _ = generate_synthetic(_spec(n=4, seed=2))
    write_trajectory_csv(tmp_path / "s1.csv", a)
    write_trajectory_csv(tmp_path / "s2.csv", b)
    records = load_records(tmp_path)
    assert len(records) == 7
    assert {r.scene_id for r in records} == {"s1", "s2"}


# ---------------------------------------------------------------------------
# drivable grid


def test_grid_raster_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    grid = DrivableGrid(
        occupancy=rng.random((12, 9)) < 0.5,
        cell_size=0.5,
        origin=np.array([3.0, -2.0]),
        rotation=0.3,
    )
    save_drivable_grid(grid, tmp_path / "g.png", tmp_path / "g.json")
    back = load_drivable_grid(tmp_path / "g.png", tmp_path / "g.json")
    np.testing.assert_array_equal(back.occupancy, grid.occupancy)
    assert back.cell_size == grid.cell_size
    np.testing.assert_allclose(back.origin, grid.origin)
    assert back.rotation == grid.rotation


# ---------------------------------------------------------------------------
# synthetic generator


def test_synth_same_seed_identical():
    ra, ta, la = generate_synthetic(_spec(seed=4))
    rb, tb, lb = generate_synthetic(_spec(seed=4))
    np.testing.assert_array_equal(ta, tb)
    np.testing.assert_array_equal(la, lb)
    for a, b in zip(ra, rb):
        np.testing.assert_array_equal(a.positions, b.positions)


def test_synth_zero_noise_hits_destinations():
    from glassdest import observation_frame

    spec = _spec(noise_sigma=0.0, n=30)
    records, targets, labels = generate_synthetic(spec)
    dests = np.asarray(spec.destinations)
    for r, t, m in zip(records, targets, labels):
        frame, _ = observation_frame(r.window(0, spec.history_len), spec.history_len)
        np.testing.assert_allclose(frame.apply(t), dests[m], atol=1e-9)


def test_synth_mode_frequencies():
    spec = _spec(weights=(0.7, 0.3), n=10000, seed=11)
    _, _, labels = generate_synthetic(spec)
    freq = np.bincount(labels, minlength=2) / len(labels)
    assert abs(freq[0] - 0.7) < 0.02
    assert abs(freq[1] - 0.3) < 0.02


def test_synth_invalid_weights():
    with pytest.raises(ValueError):
        _spec(weights=(0.7, 0.7))
    with pytest.raises(ValueError):
        _spec(weights=(0.5,))


def test_record_validation():
    with pytest.raises(ValueError):
        make_record(np.array([[0.0, 0.0], [np.nan, 1.0]]))

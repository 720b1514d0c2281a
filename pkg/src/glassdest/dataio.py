"""File formats: trajectory CSV, drivable-area rasters, scene split lists.

Trajectory CSV schema (one row per agent per frame):
    frame, track_id, class, x, y, heading, width, length, lost, occluded, generated
Heading may be left empty when unknown. Flags are 0/1.
"""
from __future__ import annotations

import csv
import json
import warnings
from pathlib import Path

import numpy as np

from .features import DrivableGrid, TrajectoryRecord

TRAJ_COLUMNS = (
    "frame",
    "track_id",
    "class",
    "x",
    "y",
    "heading",
    "width",
    "length",
    "lost",
    "occluded",
    "generated",
)


class DataFormatError(ValueError):
    """Input file does not match the documented schema."""


def _parse_float(text, column, row_no):
    text = text.strip()
    if text == "":
        return np.nan
    try:
        return float(text)
    except ValueError:
        raise DataFormatError(
            f"row {row_no}: non-numeric value '{text}' in column '{column}'"
        ) from None


def _parse_flag(text, column, row_no):
    v = _parse_float(text, column, row_no)
    if np.isnan(v):
        return False
    return bool(int(v))


def parse_trajectory_csv(path, timestep: float = 0.4, scene_id: str | None = None):
    """Read one scene file into TrajectoryRecords grouped by track id."""
    path = Path(path)
    if scene_id is None:
        scene_id = path.stem
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            warnings.warn(f"{path}: empty trajectory file", stacklevel=2)
            return []
        header = [h.strip() for h in header]
        missing = [c for c in TRAJ_COLUMNS if c not in header]
        if missing:
            raise DataFormatError(
                f"{path}: header is missing column(s): {', '.join(missing)}"
            )
        col = {c: header.index(c) for c in TRAJ_COLUMNS}
        tracks = {}
        for row_no, row in enumerate(reader, start=2):
            if not row or all(cell.strip() == "" for cell in row):
                continue
            frame = _parse_float(row[col["frame"]], "frame", row_no)
            if np.isnan(frame) or frame != int(frame):
                raise DataFormatError(f"row {row_no}: frame must be an integer")
            tid = row[col["track_id"]].strip()
            entry = tracks.setdefault(
                tid, {"class": row[col["class"]].strip(), "rows": []}
            )
            entry["rows"].append(
                (
                    int(frame),
                    _parse_float(row[col["x"]], "x", row_no),
                    _parse_float(row[col["y"]], "y", row_no),
                    _parse_float(row[col["heading"]], "heading", row_no),
                    _parse_float(row[col["width"]], "width", row_no),
                    _parse_float(row[col["length"]], "length", row_no),
                    _parse_flag(row[col["lost"]], "lost", row_no),
                    _parse_flag(row[col["occluded"]], "occluded", row_no),
                    _parse_flag(row[col["generated"]], "generated", row_no),
                    row_no,
                )
            )
    records = []
    for tid, entry in tracks.items():
        rows = sorted(entry["rows"], key=lambda r: r[0])
        frames = np.array([r[0] for r in rows])
        steps = np.diff(frames)
        if len(frames) > 1 and (steps.min() <= 0 or steps.min() != steps.max()):
            bad = rows[int(np.argmin(steps)) + 1][-1]
            raise DataFormatError(
                f"row {bad}: track '{tid}' has non-uniform or repeated frames"
            )
        records.append(
            TrajectoryRecord(
                agent_id=tid,
                agent_class=entry["class"],
                frames=frames,
                positions=np.array([[r[1], r[2]] for r in rows]),
                headings=np.array([r[3] for r in rows]),
                width=float(rows[-1][4]),
                length=float(rows[-1][5]),
                lost=np.array([r[6] for r in rows]),
                occluded=np.array([r[7] for r in rows]),
                generated=np.array([r[8] for r in rows]),
                timestep=timestep,
                scene_id=scene_id,
            )
        )
    records.sort(key=lambda r: r.agent_id)
    return records


def write_trajectory_csv(path, records) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(TRAJ_COLUMNS)
        for r in records:
            for i in range(len(r)):
                h = r.headings[i]
                w.writerow(
                    [
                        int(r.frames[i]),
                        r.agent_id,
                        r.agent_class,
                        repr(float(r.positions[i, 0])),
                        repr(float(r.positions[i, 1])),
                        "" if not np.isfinite(h) else repr(float(h)),
                        repr(float(r.width)),
                        repr(float(r.length)),
                        int(r.lost[i]),
                        int(r.occluded[i]),
                        int(r.generated[i]),
                    ]
                )


def load_records(data_path, timestep: float = 0.4):
    """Load one CSV file or every *.csv in a directory (scene id = filename)."""
    p = Path(data_path)
    if p.is_dir():
        records = []
        for f in sorted(p.glob("*.csv")):
            records.extend(parse_trajectory_csv(f, timestep=timestep))
        return records
    return parse_trajectory_csv(p, timestep=timestep)


# ---------------------------------------------------------------------------
# drivable-area raster + JSON sidecar


def load_drivable_grid(raster_path, sidecar_path) -> DrivableGrid:
    """Binary raster (PGM/PNG, nonzero = drivable) with a JSON sidecar giving
    origin, cell_size and rotation."""
    from PIL import Image

    img = np.asarray(Image.open(raster_path).convert("L"))
    with open(sidecar_path) as f:
        meta = json.load(f)
    return DrivableGrid(
        occupancy=img > 0,
        cell_size=float(meta["cell_size"]),
        origin=np.asarray(meta["origin"], dtype=float),
        rotation=float(meta.get("rotation", 0.0)),
    )


def save_drivable_grid(grid: DrivableGrid, raster_path, sidecar_path) -> None:
    from PIL import Image

    Image.fromarray((grid.occupancy * 255).astype(np.uint8)).save(raster_path)
    with open(sidecar_path, "w") as f:
        json.dump(
            {
                "origin": grid.origin.tolist(),
                "cell_size": grid.cell_size,
                "rotation": grid.rotation,
            },
            f,
            indent=1,
        )


def load_scene_split(path) -> dict:
    """Load a named scene split file: {"train": [...], "val": [...], "test": [...]}"""
    with open(path) as f:
        scenes = json.load(f)
    return {"scenes": scenes}

"""Scene-to-feature transforms for destination prediction.

Everything downstream of `canonicalize` lives in the canonical frame: the
agent's last observed position at the origin and its direction of travel
along +x, which makes the extracted features rigid-transform invariant.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

AGENT_CLASSES = ("pedestrian", "car", "bicycle", "bus", "motorcyclist")
SCHEMA_IDS = ("sdd", "ind", "argo")


class FeatureError(ValueError):
    """Record cannot be converted to the requested feature schema."""


@dataclass(frozen=True)
class TrajectoryRecord:
    """One agent's observed track at a fixed timestep."""

    agent_id: str
    agent_class: str
    frames: np.ndarray  # (T,) int, strictly increasing, constant step
    positions: np.ndarray  # (T, 2)
    headings: np.ndarray  # (T,) radians; nan where unknown
    width: float
    length: float
    lost: np.ndarray  # (T,) bool status flags
    occluded: np.ndarray
    generated: np.ndarray
    timestep: float = 0.4
    scene_id: str = ""

    def __post_init__(self):
        steps = np.diff(self.frames)
        if len(self.frames) > 1 and (steps.min() <= 0 or steps.min() != steps.max()):
            raise ValueError(
                f"track '{self.agent_id}': frames must increase with constant step"
            )
        if not np.all(np.isfinite(self.positions)):
            raise ValueError(f"track '{self.agent_id}': positions must be finite")

    def __len__(self) -> int:
        return len(self.frames)

    def window(self, start: int, stop: int) -> "TrajectoryRecord":
        return replace(
            self,
            frames=self.frames[start:stop],
            positions=self.positions[start:stop],
            headings=self.headings[start:stop],
            lost=self.lost[start:stop],
            occluded=self.occluded[start:stop],
            generated=self.generated[start:stop],
        )


@dataclass(frozen=True)
class CanonicalFrame:
    """Rigid transform placing a point at the origin, an axis along +x."""

    origin: np.ndarray  # (2,)
    angle: float  # radians

    def apply(self, points):
        pts = np.asarray(points, dtype=float)
        d = pts - self.origin
        c, s = np.cos(self.angle), np.sin(self.angle)
        return np.stack(
            [c * d[..., 0] + s * d[..., 1], -s * d[..., 0] + c * d[..., 1]], axis=-1
        )

    def apply_vector(self, vectors):
        v = np.asarray(vectors, dtype=float)
        c, s = np.cos(self.angle), np.sin(self.angle)
        return np.stack(
            [c * v[..., 0] + s * v[..., 1], -s * v[..., 0] + c * v[..., 1]], axis=-1
        )

    def invert(self, points):
        pts = np.asarray(points, dtype=float)
        c, s = np.cos(self.angle), np.sin(self.angle)
        x = c * pts[..., 0] - s * pts[..., 1] + self.origin[0]
        y = s * pts[..., 0] + c * pts[..., 1] + self.origin[1]
        return np.stack([x, y], axis=-1)


def heading_from_history(positions) -> float:
    """Direction of the last nonzero displacement; 0.0 for a frozen track."""
    pts = np.asarray(positions, dtype=float)
    d = np.diff(pts, axis=0)
    nz = np.nonzero((d != 0).any(axis=1))[0]
    if nz.size == 0:
        return 0.0
    v = d[nz[-1]]
    return float(np.arctan2(v[1], v[0]))


def canonicalize(history, heading=None):
    """Frame sending the last point to the origin and the heading to +x."""
    pts = np.asarray(history, dtype=float)
    if heading is None:
        if len(pts) < 2:
            raise ValueError("need at least 2 points or an explicit heading")
        heading = heading_from_history(pts)
    frame = CanonicalFrame(origin=pts[-1].astype(float).copy(), angle=float(heading))
    return frame, frame.apply(pts)


# ---------------------------------------------------------------------------
# collision-point features

POC_DIRECTIONS = ("forward", "left", "backward", "right")
_POC_OFFSETS = (0.0, np.pi / 2, np.pi, -np.pi / 2)
_EPS = 1e-12


def _crossing_point(e, ve, q, vq):
    """Constant-velocity crossing of the ego ray with a neighbour's path.

    Returns the crossing point when it lies ahead of both agents in time,
    the meeting point for collinear closing paths, or None.
    """
    d = q - e
    det = -ve[0] * vq[1] + vq[0] * ve[1]
    if abs(det) > _EPS:
        t = (-d[0] * vq[1] + vq[0] * d[1]) / det
        tau = (ve[0] * d[1] - ve[1] * d[0]) / det
        if t >= 0.0 and tau >= 0.0:
            return e + ve * t
        return None
    se = float(np.hypot(ve[0], ve[1]))
    if se < _EPS:
        return None
    u = ve / se
    offset = d[0] * u[1] - d[1] * u[0]
    if abs(offset) > 1e-9 * max(1.0, float(np.hypot(d[0], d[1]))):
        return None  # parallel but laterally offset: never crosses
    closing = se - float(vq @ u)
    if closing <= _EPS:
        return None
    t = float(d @ u) / closing
    if t < 0.0:
        return None
    return e + ve * t


def poc_features(position, heading, speed, neighbors, default=0.0) -> np.ndarray:
    """Collision-point features for four assumed ego directions.

    For each of the ego directions (heading, +90°, 180°, -90°, all at the
    current speed) the crossing points with every neighbour's constant-
    velocity path are averaged and reduced to the signed distance along that
    direction. Directions without any crossing return ``default``.

    ``neighbors`` is an (m, 4) array of rows (x, y, vx, vy) in the same frame
    as ``position``.
    """
    out = np.full(4, float(default))
    nbrs = np.asarray(neighbors, dtype=float).reshape(-1, 4)
    if nbrs.shape[0] == 0 or speed <= _EPS:
        return out
    e = np.asarray(position, dtype=float)
    for i, off in enumerate(_POC_OFFSETS):
        a = heading + off
        u = np.array([np.cos(a), np.sin(a)])
        ve = speed * u
        pts = [
            pt
            for pt in (_crossing_point(e, ve, q[:2], q[2:]) for q in nbrs)
            if pt is not None
        ]
        if pts:
            mean = np.mean(pts, axis=0)
            out[i] = float((mean - e) @ u)
    return out


# ---------------------------------------------------------------------------
# drivable-area grid


@dataclass(frozen=True)
class DrivableGrid:
    """Binary drivable-area raster with a rigid grid-to-world transform."""

    occupancy: np.ndarray  # (H, W) bool
    cell_size: float
    origin: np.ndarray  # (2,) world position of the (row 0, col 0) cell corner
    rotation: float = 0.0

    def __post_init__(self):
        if self.occupancy.ndim != 2:
            raise ValueError("occupancy must be a 2D raster")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")

    def cell_centers(self) -> np.ndarray:
        """World coordinates of all cell centers, shape (H, W, 2)."""
        h, w = self.occupancy.shape
        cols, rows = np.meshgrid(np.arange(w), np.arange(h))
        gx = (cols + 0.5) * self.cell_size
        gy = (rows + 0.5) * self.cell_size
        c, s = np.cos(self.rotation), np.sin(self.rotation)
        x = self.origin[0] + c * gx - s * gy
        y = self.origin[1] + s * gx + c * gy
        return np.stack([x, y], axis=-1)

    def transformed(self, frame: CanonicalFrame) -> "DrivableGrid":
        """The same raster expressed in ``frame`` coordinates."""
        return DrivableGrid(
            occupancy=self.occupancy,
            cell_size=self.cell_size,
            origin=frame.apply(self.origin),
            rotation=self.rotation - frame.angle,
        )


def road_mode_centers(grid: DrivableGrid, partition) -> np.ndarray:
    """Centroid of the drivable cells under each mode rectangle.

    Modes whose rectangles cover no drivable cell yield (0, 0). The grid must
    already be expressed in the frame the rectangles live in.
    """
    centers = grid.cell_centers()[grid.occupancy]
    out = np.zeros((len(partition.modes), 2))
    if centers.size == 0:
        return out
    x = centers[:, 0]
    y = centers[:, 1]
    for i, mode in enumerate(partition.modes):
        sel = np.zeros(len(centers), dtype=bool)
        for x0, y0, x1, y1 in mode.rects:
            sel |= (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)
        if sel.any():
            out[i] = centers[sel].mean(axis=0)
    return out


# ---------------------------------------------------------------------------
# feature schemas


@dataclass(frozen=True)
class FeatureVector:
    names: tuple
    values: np.ndarray


def feature_names(schema: str, n_modes: int = 0) -> tuple:
    if schema == "sdd":
        names = [f"rel_x_{i}" for i in range(1, 8)]
        names += [f"rel_y_{i}" for i in range(1, 8)]
        names += ["lost_sum", "occluded_sum", "generated_sum", "width", "length"]
    elif schema == "ind":
        names = [f"rel_x_{i}" for i in range(1, 9)]
        names += [f"rel_y_{i}" for i in range(1, 9)]
        names += ["speed", "accel", "heading", "width", "length"]
    elif schema == "argo":
        names = [f"rel_x_{i}" for i in range(1, 8)]
        names += [f"rel_y_{i}" for i in range(1, 8)]
        names += [f"poc_{d}" for d in POC_DIRECTIONS]
        names += [f"mode{m}_c{a}" for m in range(n_modes) for a in ("x", "y")]
    else:
        raise FeatureError(f"unknown schema '{schema}'")
    return tuple(names)


def _wrap_angle(a: float) -> float:
    return float(np.arctan2(np.sin(a), np.cos(a)))


def observation_frame(record: TrajectoryRecord, history_len: int = 8):
    """Canonical frame of the last ``history_len`` observed steps.

    The frame angle is the direction of travel; the recorded heading only
    breaks ties for frozen tracks. Returns (frame, observed window).
    """
    t = len(record)
    if t < history_len:
        raise FeatureError(
            f"need {history_len} observed steps, "
            f"track '{record.agent_id}' has only {t}"
        )
    obs = record.window(t - history_len, t)
    pts = obs.positions
    angle = heading_from_history(pts)
    if angle == 0.0 and np.allclose(np.diff(pts, axis=0), 0.0):
        h = obs.headings[-1]
        angle = float(h) if np.isfinite(h) else 0.0
    frame = CanonicalFrame(origin=pts[-1].astype(float).copy(), angle=angle)
    return frame, obs


def build_features(
    record: TrajectoryRecord,
    schema: str,
    *,
    history_len: int = 8,
    neighbor_states=None,
    grid: DrivableGrid | None = None,
    partition=None,
    poc_default: float = 0.0,
):
    """Convert the last ``history_len`` observed steps into a feature vector.

    Returns (CanonicalFrame, FeatureVector) with every feature expressed in
    the canonical frame of the observed window.
    """
    if schema not in SCHEMA_IDS:
        raise FeatureError(f"unknown schema '{schema}'")
    frame, obs = observation_frame(record, history_len)
    pts = obs.positions
    rel = frame.apply(pts)
    dt = record.timestep

    names = []
    vals = []
    if schema == "sdd":
        names += [f"rel_x_{i}" for i in range(1, 8)]
        vals += list(rel[:7, 0])
        names += [f"rel_y_{i}" for i in range(1, 8)]
        vals += list(rel[:7, 1])
        for flag, label in (
            (obs.lost, "lost_sum"),
            (obs.occluded, "occluded_sum"),
            (obs.generated, "generated_sum"),
        ):
            names.append(label)
            vals.append(float(np.sum(flag)))
        names += ["width", "length"]
        vals += [record.width, record.length]
    elif schema == "ind":
        names += [f"rel_x_{i}" for i in range(1, 9)]
        vals += list(rel[:, 0])
        names += [f"rel_y_{i}" for i in range(1, 9)]
        vals += list(rel[:, 1])
        speed = float(np.linalg.norm(pts[-1] - pts[-2])) / dt
        prev_speed = float(np.linalg.norm(pts[-2] - pts[-3])) / dt
        h = obs.headings[-1]
        rel_heading = _wrap_angle(float(h) - frame.angle) if np.isfinite(h) else np.nan
        names += ["speed", "accel", "heading", "width", "length"]
        vals += [speed, (speed - prev_speed) / dt, rel_heading, record.width, record.length]
    else:  # argo
        names += [f"rel_x_{i}" for i in range(1, 8)]
        vals += list(rel[:7, 0])
        names += [f"rel_y_{i}" for i in range(1, 8)]
        vals += list(rel[:7, 1])
        speed = float(np.linalg.norm(pts[-1] - pts[-2])) / dt
        if neighbor_states is None or len(np.atleast_2d(neighbor_states)) == 0:
            canon = np.empty((0, 4))
        else:
            nbrs = np.asarray(neighbor_states, dtype=float).reshape(-1, 4)
            canon = np.hstack(
                [frame.apply(nbrs[:, :2]), frame.apply_vector(nbrs[:, 2:])]
            )
        poc = poc_features(np.zeros(2), 0.0, speed, canon, default=poc_default)
        names += [f"poc_{d}" for d in POC_DIRECTIONS]
        vals += list(poc)
        if partition is not None:
            if grid is not None:
                centers = road_mode_centers(grid.transformed(frame), partition)
            else:
                centers = np.zeros((len(partition.modes), 2))
            for m in range(len(partition.modes)):
                names += [f"mode{m}_cx", f"mode{m}_cy"]
                vals += [float(centers[m, 0]), float(centers[m, 1])]

    return frame, FeatureVector(names=tuple(names), values=np.asarray(vals, dtype=float))

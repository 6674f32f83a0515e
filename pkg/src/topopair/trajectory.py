"""Core trajectory types, file ingestion, and basic geometry.

A trajectory is a time-ordered sequence of SLAM keyframes with planar
topometric positions. All downstream modules (turning-point detection,
matching, ground-truth generation) operate on these types.

Positions are 2D per-floor coordinates. 3D SLAM exports are projected to
2D at ingestion by dropping one axis, by default the axis with the least
variance across the file (SLAM gravity alignment is not guaranteed, so
the vertical axis is inferred rather than assumed).
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ParseError, ValidationError


class TrajectoryFormat(str, enum.Enum):
    """Supported trajectory file formats."""

    TUM = "tum"
    CSV = "csv"

    @classmethod
    def from_path(cls, path: str | Path) -> "TrajectoryFormat":
        """Infer the format from a file extension (.csv -> CSV, else TUM)."""
        return cls.CSV if str(path).lower().endswith(".csv") else cls.TUM


@dataclass(frozen=True)
class Keyframe:
    """One SLAM keyframe: a timestamp and a planar topometric position."""

    timestamp: float
    position: np.ndarray
    raw_position_3d: np.ndarray | None = None

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float)
        if pos.shape != (2,):
            raise ValidationError(f"keyframe position must be a 2-vector, got shape {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise ValidationError("keyframe position components must be finite")
        if self.timestamp < 0:
            raise ValidationError(f"keyframe timestamp must be >= 0, got {self.timestamp}")
        object.__setattr__(self, "position", pos)
        if self.raw_position_3d is not None:
            object.__setattr__(
                self, "raw_position_3d", np.asarray(self.raw_position_3d, dtype=float)
            )


@dataclass(frozen=True)
class Trajectory:
    """A time-ordered keyframe trajectory for one visit of a scene.

    Timestamps are seconds since the start of the source video and must be
    strictly increasing; duplicate timestamps are rejected rather than
    deduplicated so that SLAM export bugs surface at ingestion. Positions
    are stored as an (n, 2) array; the raw 3D positions, when parsed from
    a 3D file, are retained untouched in ``raw_positions_3d``.
    """

    scene_id: str
    visit_id: str
    timestamps: np.ndarray
    positions: np.ndarray
    raw_positions_3d: np.ndarray | None = None
    source_path: str = ""

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=float)
        pos = np.asarray(self.positions, dtype=float)
        if ts.ndim != 1 or pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] != ts.shape[0]:
            raise ValidationError(
                f"expected timestamps (n,) and positions (n, 2), got {ts.shape} and {pos.shape}"
            )
        if ts.shape[0] < 2:
            raise ValidationError(f"trajectory needs at least 2 keyframes, got {ts.shape[0]}")
        if ts[0] < 0:
            raise ValidationError(f"timestamps must be >= 0, first is {ts[0]}")
        if not np.all(np.isfinite(pos)):
            raise ValidationError("positions must be finite")
        diffs = np.diff(ts)
        if np.any(diffs <= 0):
            i = int(np.argmax(diffs <= 0))
            raise ValidationError(
                "timestamps must be strictly increasing; "
                f"keyframes {i} and {i + 1} have timestamps {ts[i]} and {ts[i + 1]}"
            )
        ts.setflags(write=False)
        pos.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "positions", pos)
        if self.raw_positions_3d is not None:
            raw = np.asarray(self.raw_positions_3d, dtype=float)
            raw.setflags(write=False)
            object.__setattr__(self, "raw_positions_3d", raw)

    def __len__(self) -> int:
        return int(self.timestamps.shape[0])

    def keyframe(self, index: int) -> Keyframe:
        """Return keyframe ``index`` as a Keyframe value."""
        raw = None if self.raw_positions_3d is None else self.raw_positions_3d[index]
        return Keyframe(float(self.timestamps[index]), self.positions[index], raw)

    @property
    def keyframes(self) -> tuple[Keyframe, ...]:
        return tuple(self.keyframe(i) for i in range(len(self)))

    def with_positions(self, positions: np.ndarray) -> "Trajectory":
        """Return a copy with replaced positions (raw 3D dropped)."""
        return Trajectory(
            scene_id=self.scene_id,
            visit_id=self.visit_id,
            timestamps=self.timestamps,
            positions=positions,
            raw_positions_3d=None,
            source_path=self.source_path,
        )


def _least_variance_axis(points_3d: np.ndarray) -> int:
    """Axis index with the least variance; ties break toward the last axis."""
    var = np.var(points_3d, axis=0)
    # argmax over reversed array picks the highest index among minima
    return int(2 - np.argmin(var[::-1]))


def _project_to_2d(points_3d: np.ndarray, vertical_axis: int | None) -> np.ndarray:
    axis = _least_variance_axis(points_3d) if vertical_axis is None else vertical_axis
    if axis not in (0, 1, 2):
        raise ValidationError(f"vertical_axis must be 0, 1, or 2, got {axis}")
    keep = [i for i in range(3) if i != axis]
    return points_3d[:, keep]


def _check_monotonic(timestamps: list[float], lines: list[int], path: str) -> None:
    for i in range(1, len(timestamps)):
        if timestamps[i] <= timestamps[i - 1]:
            raise ValidationError(
                f"{path}: timestamps not strictly increasing: line {lines[i]} has "
                f"timestamp {timestamps[i]} after {timestamps[i - 1]} (line {lines[i - 1]})"
            )


def _parse_tum(text: str, path: str) -> tuple[list[float], list[list[float]], list[int]]:
    timestamps: list[float] = []
    raw: list[list[float]] = []
    lines: list[int] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split()
        if len(fields) != 8:
            raise ParseError(
                f"expected 8 whitespace-separated fields "
                f"(timestamp tx ty tz qx qy qz qw), got {len(fields)}",
                path=path,
                line=lineno,
            )
        try:
            values = [float(f) for f in fields]
        except ValueError as exc:
            raise ParseError(f"non-numeric field: {exc}", path=path, line=lineno) from None
        timestamps.append(values[0])
        raw.append(values[1:4])
        lines.append(lineno)
    return timestamps, raw, lines


def _parse_csv(text: str, path: str) -> tuple[list[float], list[list[float]], list[int], bool]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file", path=path, line=1) from None
    cols = [c.strip().lower() for c in header]
    if cols == ["timestamp", "x", "y"]:
        has_z = False
    elif cols == ["timestamp", "x", "y", "z"]:
        has_z = True
    else:
        raise ParseError(
            f"expected header 'timestamp,x,y' or 'timestamp,x,y,z', got {','.join(cols)}",
            path=path,
            line=1,
        )
    timestamps: list[float] = []
    raw: list[list[float]] = []
    lines: list[int] = []
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(cols):
            raise ParseError(
                f"expected {len(cols)} fields, got {len(row)}", path=path, line=lineno
            )
        try:
            values = [float(f) for f in row]
        except ValueError as exc:
            raise ParseError(f"non-numeric field: {exc}", path=path, line=lineno) from None
        timestamps.append(values[0])
        raw.append(values[1:])
        lines.append(lineno)
    return timestamps, raw, lines, has_z


def parse_trajectory(
    path: str | Path,
    format: TrajectoryFormat | str | None = None,
    scene_id: str = "",
    visit_id: str = "",
    vertical_axis: int | None = None,
) -> Trajectory:
    """Parse a keyframe trajectory file into a Trajectory.

    Args:
        path: Trajectory file. TUM files hold one keyframe per line as
            ``timestamp tx ty tz qx qy qz qw`` with ``#`` comment lines
            ignored; CSV files carry a ``timestamp,x,y[,z]`` header.
        format: Explicit format; inferred from the extension when None.
        scene_id, visit_id: Provenance identifiers stored on the result.
        vertical_axis: Axis (0, 1, or 2) to drop when projecting 3D input
            to 2D. None selects the axis with the least variance.

    Raises:
        ParseError: malformed line (reported with its line number).
        ValidationError: non-monotonic timestamps or fewer than 2 keyframes.
    """
    path = Path(path)
    if format is None:
        fmt = TrajectoryFormat.from_path(path)
    else:
        fmt = TrajectoryFormat(format.lower() if isinstance(format, str) else format)
    text = path.read_text(encoding="utf-8")

    if fmt is TrajectoryFormat.TUM:
        timestamps, raw, lines = _parse_tum(text, str(path))
        is_3d = True
    else:
        timestamps, raw, lines, is_3d = _parse_csv(text, str(path))

    if len(timestamps) < 2:
        raise ValidationError(f"{path}: trajectory needs at least 2 keyframes, got {len(timestamps)}")
    _check_monotonic(timestamps, lines, str(path))

    if is_3d:
        raw_arr = np.asarray(raw, dtype=float)
        positions = _project_to_2d(raw_arr, vertical_axis)
        raw_3d: np.ndarray | None = raw_arr
    else:
        positions = np.asarray(raw, dtype=float)
        raw_3d = None

    return Trajectory(
        scene_id=scene_id,
        visit_id=visit_id,
        timestamps=np.asarray(timestamps, dtype=float),
        positions=positions,
        raw_positions_3d=raw_3d,
        source_path=str(path),
    )


def serialize_trajectory(traj: Trajectory, path: str | Path, format: TrajectoryFormat | str | None = None) -> None:
    """Write a trajectory back to disk in TUM or CSV format.

    TUM output uses the retained raw 3D positions when present, otherwise
    writes ``x y 0`` with an identity quaternion; a subsequent parse
    recovers (timestamp, position) to within float round-trip precision.
    """
    path = Path(path)
    if format is None:
        fmt = TrajectoryFormat.from_path(path)
    else:
        fmt = TrajectoryFormat(format.lower() if isinstance(format, str) else format)
    lines: list[str] = []
    timestamps = traj.timestamps.tolist()
    if fmt is TrajectoryFormat.TUM:
        lines.append("# timestamp tx ty tz qx qy qz qw")
        raw = (
            traj.raw_positions_3d
            if traj.raw_positions_3d is not None
            else np.column_stack([traj.positions, np.zeros(len(traj))])
        )
        for t, (x, y, z) in zip(timestamps, raw.tolist()):
            lines.append(f"{t!r} {x!r} {y!r} {z!r} 0 0 0 1")
    else:
        if traj.raw_positions_3d is not None:
            lines.append("timestamp,x,y,z")
            for t, (x, y, z) in zip(timestamps, traj.raw_positions_3d.tolist()):
                lines.append(f"{t!r},{x!r},{y!r},{z!r}")
        else:
            lines.append("timestamp,x,y")
            for t, (x, y) in zip(timestamps, traj.positions.tolist()):
                lines.append(f"{t!r},{x!r},{y!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def segment_lengths(points: np.ndarray) -> np.ndarray:
    """Euclidean lengths of consecutive segments of an (n, 2) polyline."""
    return np.linalg.norm(np.diff(np.asarray(points, dtype=float), axis=0), axis=1)


def cumulative_arclength(points: np.ndarray) -> np.ndarray:
    """Cumulative arc length at each vertex, starting at 0."""
    seg = segment_lengths(points)
    return np.concatenate([[0.0], np.cumsum(seg)])


def polyline_length(traj: Trajectory) -> float:
    """Total polyline length of the trajectory's keyframe positions."""
    return float(segment_lengths(traj.positions).sum())


@dataclass(frozen=True)
class VisitEntry:
    """One visit of a scene: its trajectory file and video duration."""

    visit_id: str
    trajectory_path: str
    duration: float
    format: TrajectoryFormat | None = None


@dataclass(frozen=True)
class SceneManifest:
    """Per-scene description of visits and the trajectory pairs to annotate.

    Stored as a YAML document next to the scene's trajectory files; see
    docs/formats.md for the schema.
    """

    scene_id: str
    visits: tuple[VisitEntry, ...]
    pairings: tuple[tuple[str, str], ...]
    units_per_meter: float = 1.0
    base_dir: Path = field(default_factory=Path)

    def __post_init__(self):
        ids = [v.visit_id for v in self.visits]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"duplicate visit_id in manifest for scene {self.scene_id}")
        known = set(ids)
        for a, b in self.pairings:
            for vid in (a, b):
                if vid not in known:
                    raise ValidationError(
                        f"pairing references unknown visit_id {vid!r} in scene {self.scene_id}"
                    )
        if self.units_per_meter <= 0:
            raise ValidationError("units_per_meter must be positive")

    def visit(self, visit_id: str) -> VisitEntry:
        for v in self.visits:
            if v.visit_id == visit_id:
                return v
        raise ValidationError(f"unknown visit_id {visit_id!r} in scene {self.scene_id}")

    def load_trajectory(self, visit_id: str) -> Trajectory:
        """Parse a visit's trajectory and check it against the declared duration."""
        entry = self.visit(visit_id)
        traj_path = Path(entry.trajectory_path)
        if not traj_path.is_absolute():
            traj_path = self.base_dir / traj_path
        traj = parse_trajectory(
            traj_path, format=entry.format, scene_id=self.scene_id, visit_id=visit_id
        )
        last = float(traj.timestamps[-1])
        if entry.duration < last:
            raise ValidationError(
                f"visit {visit_id!r}: video duration {entry.duration} is shorter than "
                f"the last keyframe timestamp {last}"
            )
        return traj


def load_scene_manifest(path: str | Path) -> SceneManifest:
    """Load a scene manifest YAML file; relative trajectory paths resolve
    against the manifest's directory."""
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ParseError(f"invalid YAML: {exc}", path=str(path)) from None
    if not isinstance(doc, dict):
        raise ParseError("manifest must be a YAML mapping", path=str(path))
    try:
        visits = tuple(
            VisitEntry(
                visit_id=str(v["visit_id"]),
                trajectory_path=str(v["trajectory"]),
                duration=float(v["duration"]),
                format=TrajectoryFormat(v["format"].lower()) if "format" in v else None,
            )
            for v in doc.get("visits", [])
        )
        pairings = tuple((str(p[0]), str(p[1])) for p in doc.get("pairings", []))
        return SceneManifest(
            scene_id=str(doc["scene_id"]),
            visits=visits,
            pairings=pairings,
            units_per_meter=float(doc.get("units_per_meter", 1.0)),
            base_dir=path.parent,
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ParseError(f"manifest missing or malformed field: {exc}", path=str(path)) from None


def save_scene_manifest(manifest: SceneManifest, path: str | Path) -> None:
    doc = {
        "scene_id": manifest.scene_id,
        "units_per_meter": manifest.units_per_meter,
        "visits": [
            {
                "visit_id": v.visit_id,
                "trajectory": v.trajectory_path,
                "duration": v.duration,
                **({"format": v.format.value} if v.format is not None else {}),
            }
            for v in manifest.visits
        ],
        "pairings": [list(p) for p in manifest.pairings],
    }
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False), encoding="utf-8")

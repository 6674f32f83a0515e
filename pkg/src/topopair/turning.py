"""Turning-point detection on keyframe trajectories.

The route's shape is captured by its turning points: keyframes where the
walking direction changes sharply. Detection simplifies the keyframe
polyline with Ramer-Douglas-Peucker, thresholds the turn angle at each
simplified vertex, and snaps each kept vertex to the nearest original
keyframe. The first and last keyframes are always included as virtual
endpoints so that downstream segment splitting covers the whole video.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .trajectory import Trajectory, polyline_length

DEFAULT_ANGLE_THRESHOLD_DEG = 30.0
DEFAULT_EPSILON_FRACTION = 0.01  # of total polyline length


class TurningPointOrigin(str, enum.Enum):
    AUTO = "auto"
    MANUAL_ADDED = "manual_added"
    MANUAL_MOVED = "manual_moved"


@dataclass(frozen=True)
class TurningPoint:
    """A detected (or manually placed) route corner.

    ``angle_deg`` is the absolute deviation from straight-ahead at the
    corner: 0 means the route continues straight, 180 a full reversal.
    Virtual endpoints and manually placed points carry no angle.
    """

    keyframe_index: int
    angle_deg: float | None
    origin: TurningPointOrigin = TurningPointOrigin.AUTO

    def __post_init__(self):
        if self.angle_deg is not None and not (0.0 <= self.angle_deg <= 180.0):
            raise ValidationError(f"angle_deg must be in [0, 180], got {self.angle_deg}")


@dataclass(frozen=True)
class TurningPointSet:
    """Ordered turning points of one trajectory plus the detection parameters."""

    trajectory: Trajectory
    points: tuple[TurningPoint, ...]
    epsilon: float
    angle_threshold_deg: float

    def __post_init__(self):
        n = len(self.trajectory)
        indices = [p.keyframe_index for p in self.points]
        for idx in indices:
            if not (0 <= idx < n):
                raise ValidationError(f"turning point index {idx} out of range [0, {n})")
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValidationError("turning point indices must be strictly increasing")
        if not indices or indices[0] != 0 or indices[-1] != n - 1:
            raise ValidationError(
                "turning point set must include the first and last keyframes as endpoints"
            )

    def __len__(self) -> int:
        return len(self.points)

    @property
    def keyframe_indices(self) -> np.ndarray:
        return np.array([p.keyframe_index for p in self.points], dtype=int)

    def positions(self) -> np.ndarray:
        """(k, 2) positions of the turning points' keyframes."""
        return self.trajectory.positions[self.keyframe_indices]

    def timestamps(self) -> np.ndarray:
        return self.trajectory.timestamps[self.keyframe_indices]


def _point_segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from each row of ``points`` to the segment a-b."""
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(points - a, axis=1)
    t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
    proj = a + np.outer(t, ab)
    return np.linalg.norm(points - proj, axis=1)


def rdp_simplify(points: np.ndarray, epsilon: float) -> np.ndarray:
    """Simplify a polyline with Ramer-Douglas-Peucker, returning kept indices.

    Uses point-to-segment distance, so every discarded point lies within
    ``epsilon`` of the chord between its two enclosing kept vertices. The
    farthest point is selected with a strict comparison in scan order,
    which makes the result deterministic (first maximum wins).

    Args:
        points: (n, 2) vertex array, n >= 2.
        epsilon: Positive deviation tolerance in position units.

    Returns:
        Strictly increasing indices into ``points``; always includes 0 and n-1.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValidationError(f"expected (n, 2) points, got shape {pts.shape}")
    n = pts.shape[0]
    if n < 2:
        raise ValidationError(f"need at least 2 points to simplify, got {n}")
    if epsilon <= 0:
        raise ValidationError(f"epsilon must be positive, got {epsilon}")

    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[n - 1] = True
    # explicit stack instead of recursion: SLAM trajectories can be long
    stack = [(0, n - 1)]
    while stack:
        first, last = stack.pop()
        if last - first < 2:
            continue
        interior = pts[first + 1 : last]
        dists = _point_segment_distance(interior, pts[first], pts[last])
        k = int(np.argmax(dists))  # first maximum
        if dists[k] > epsilon:
            split = first + 1 + k
            keep[split] = True
            stack.append((first, split))
            stack.append((split, last))
    return np.flatnonzero(keep)


def turn_angle(prev: np.ndarray, vertex: np.ndarray, next: np.ndarray) -> float:
    """Turn angle at ``vertex`` in degrees: deviation from straight-ahead.

    0 = collinear continuation, 90 = right angle, 180 = full reversal.
    """
    prev = np.asarray(prev, dtype=float)
    vertex = np.asarray(vertex, dtype=float)
    next = np.asarray(next, dtype=float)
    d1 = vertex - prev
    d2 = next - vertex
    n1 = np.linalg.norm(d1)
    n2 = np.linalg.norm(d2)
    if n1 == 0.0 or n2 == 0.0:
        raise ValidationError("turn angle undefined for zero-length incident segment")
    cross = d1[0] * d2[1] - d1[1] * d2[0]
    dot = float(d1 @ d2)
    return float(np.degrees(np.arctan2(abs(cross), dot)))


def detect_turning_points(
    traj: Trajectory,
    epsilon: float | None = None,
    angle_threshold_deg: float = DEFAULT_ANGLE_THRESHOLD_DEG,
) -> TurningPointSet:
    """Detect route turning points on a trajectory.

    Simplifies the keyframe polyline with RDP, keeps interior simplified
    vertices whose turn angle exceeds the threshold, and snaps each one to
    the nearest original keyframe (arg-min Euclidean distance; ties break
    toward the lower index). With a vertex-subset simplifier the snap is a
    no-op, but it is kept so a smoothing simplifier can be swapped in
    without changing this contract. Virtual endpoints at keyframes 0 and
    n-1 are always included.

    Args:
        traj: Trajectory to analyze.
        epsilon: RDP tolerance; defaults to 1% of the polyline length.
        angle_threshold_deg: Minimum turn angle, in (0, 180).
    """
    if epsilon is None:
        epsilon = DEFAULT_EPSILON_FRACTION * polyline_length(traj)
        if epsilon <= 0:
            raise ValidationError("cannot derive epsilon: trajectory has zero length")
    if not (0.0 < angle_threshold_deg < 180.0):
        raise ValidationError(
            f"angle_threshold_deg must be in (0, 180), got {angle_threshold_deg}"
        )
    pts = traj.positions
    simplified = rdp_simplify(pts, epsilon)
    simp_pts = pts[simplified]

    n = len(traj)
    detected: dict[int, float] = {}
    for k in range(1, len(simplified) - 1):
        angle = turn_angle(simp_pts[k - 1], simp_pts[k], simp_pts[k + 1])
        if angle <= angle_threshold_deg:
            continue
        dists = np.linalg.norm(pts - simp_pts[k], axis=1)
        snapped = int(np.argmin(dists))  # first minimum = lower index on ties
        if snapped in (0, n - 1):
            continue  # endpoints are covered by the virtual turning points
        if snapped not in detected or angle > detected[snapped]:
            detected[snapped] = angle

    points = [TurningPoint(0, None)]
    points.extend(TurningPoint(idx, detected[idx]) for idx in sorted(detected))
    points.append(TurningPoint(n - 1, None))
    return TurningPointSet(
        trajectory=traj,
        points=tuple(points),
        epsilon=float(epsilon),
        angle_threshold_deg=float(angle_threshold_deg),
    )


def format_turning_points(tps: TurningPointSet) -> str:
    """Render a turning point set as the text document the CLI writes.

    One point per line: index, timestamp, x, y, angle (or '-'), origin.
    """
    lines = [
        f"# epsilon={tps.epsilon!r} angle_threshold_deg={tps.angle_threshold_deg!r}",
        "# index timestamp x y angle_deg origin",
    ]
    for p in tps.points:
        t = float(tps.trajectory.timestamps[p.keyframe_index])
        x, y = tps.trajectory.positions[p.keyframe_index].tolist()
        angle = "-" if p.angle_deg is None else repr(float(p.angle_deg))
        lines.append(f"{p.keyframe_index} {t!r} {x!r} {y!r} {angle} {p.origin.value}")
    return "\n".join(lines) + "\n"

"""Frame-pair generation with interpolated topometric ground truth.

Given a matched trajectory pair and the two video durations, the videos
are split into segment pairs at the matched turning points' timestamps.
Each segment pair of durations (T1, T2) yields n = floor(2 * min(T1, T2))
frame pairs, sampled at the midpoints of n even parts of each segment.
Their ground-truth locations come from evenly interpolating a B-spline
fitted through the reference trajectory's keyframe positions between the
segment's turning points. Trajectory B is the reference frame of record.

Frame extraction from video files is out of scope: the output is a
timestamp manifest an external tool can cut frames with.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import BSpline, make_interp_spline

from .errors import DegenerateGeometryError, ValidationError
from .matching import TurningPointMatch, active_matches, check_monotonic
from .turning import TurningPointSet


@dataclass(frozen=True)
class SegmentPair:
    """One pair of video segments between consecutive matched turning points."""

    match_start: TurningPointMatch
    match_end: TurningPointMatch
    t_a_start: float
    t_a_end: float
    t_b_start: float
    t_b_end: float

    def __post_init__(self):
        if self.t_a_end <= self.t_a_start or self.t_b_end <= self.t_b_start:
            raise ValidationError(
                f"zero-duration segment between matches "
                f"({self.match_start.index_a}, {self.match_start.index_b}) and "
                f"({self.match_end.index_a}, {self.match_end.index_b}): "
                f"A [{self.t_a_start}, {self.t_a_end}], B [{self.t_b_start}, {self.t_b_end}]"
            )

    @property
    def duration_a(self) -> float:
        return self.t_a_end - self.t_a_start

    @property
    def duration_b(self) -> float:
        return self.t_b_end - self.t_b_start


@dataclass(frozen=True)
class FramePair:
    """Two video timestamps sharing one ground-truth location in B's frame."""

    timestamp_a: float
    timestamp_b: float
    location: np.ndarray
    segment: int
    index: int
    fallback: bool = False

    def __post_init__(self):
        loc = np.asarray(self.location, dtype=float)
        if loc.shape != (2,) or not np.all(np.isfinite(loc)):
            raise ValidationError("frame pair location must be a finite 2-vector")
        object.__setattr__(self, "location", loc)


@dataclass(frozen=True)
class SplineCurve:
    """A fitted 2D curve on the parameter domain [0, 1].

    Cubic where the data allows; the degree drops to (points - 1) for
    fewer than 4 points. Knots use chord-length parameterization, so
    evaluation at evenly spaced parameters is approximately even in arc
    length.
    """

    spline: BSpline
    degree: int

    def evaluate(self, t: float | np.ndarray) -> np.ndarray:
        """Evaluate at parameter(s) t in [0, 1]."""
        return self.spline(t)


def split_segments(
    matches: list[TurningPointMatch],
    tps_a: TurningPointSet,
    tps_b: TurningPointSet,
    duration_a: float,
    duration_b: float,
) -> list[SegmentPair]:
    """Split the video pair into segment pairs at matched turning points.

    Boundaries are the matched turning points' keyframe timestamps, except
    that the first segment starts at 0 and the last ends at the video
    duration: the virtual endpoint turning points absorb the lead-in and
    lead-out of each video. Rejected matches do not contribute boundaries.

    Raises:
        ValidationError: fewer than 2 surviving matches, or a segment with
            zero duration in either video (named in the message).
    """
    act = active_matches(matches)
    if len(act) < 2:
        raise ValidationError(f"need at least 2 surviving matches, got {len(act)}")
    check_monotonic(act)
    if duration_a <= 0 or duration_b <= 0:
        raise ValidationError("video durations must be positive")
    ts_a = tps_a.timestamps()
    ts_b = tps_b.timestamps()
    if duration_a < ts_a[-1] or duration_b < ts_b[-1]:
        raise ValidationError("video duration is shorter than the last turning point")

    last = len(act) - 1
    segments = []
    for k in range(last):
        start, end = act[k], act[k + 1]
        segments.append(
            SegmentPair(
                match_start=start,
                match_end=end,
                t_a_start=0.0 if k == 0 else float(ts_a[start.index_a]),
                t_a_end=duration_a if k + 1 == last else float(ts_a[end.index_a]),
                t_b_start=0.0 if k == 0 else float(ts_b[start.index_b]),
                t_b_end=duration_b if k + 1 == last else float(ts_b[end.index_b]),
            )
        )
    return segments


def frame_count(duration_1: float, duration_2: float) -> int:
    """Number of frame pairs for a segment pair: floor(2 * min(T1, T2)), at least 1."""
    if duration_1 <= 0 or duration_2 <= 0:
        raise ValidationError(
            f"segment durations must be positive, got {duration_1} and {duration_2}"
        )
    return max(1, math.floor(2.0 * min(duration_1, duration_2)))


def sample_frame_timestamps(seg: SegmentPair, n: int) -> list[tuple[float, float]]:
    """Midpoint timestamps of n even parts of each segment, independently per video."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    mids = (np.arange(n) + 0.5) / n
    t_a = seg.t_a_start + mids * seg.duration_a
    t_b = seg.t_b_start + mids * seg.duration_b
    return list(zip(t_a.tolist(), t_b.tolist()))


def _collapse_duplicates(points: np.ndarray) -> np.ndarray:
    keep = [0]
    for i in range(1, points.shape[0]):
        if not np.array_equal(points[i], points[keep[-1]]):
            keep.append(i)
    return points[keep]


def fit_bspline(points: np.ndarray) -> SplineCurve:
    """Fit an interpolating B-spline through an ordered 2D point sequence.

    Chord-length parameterization normalized to [0, 1]; cubic when at
    least 4 distinct points remain after collapsing consecutive
    duplicates, otherwise degree points-1.

    Raises:
        DegenerateGeometryError: all points identical.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValidationError(f"expected (n, 2) points, got shape {pts.shape}")
    if pts.shape[0] < 2:
        raise ValidationError(f"need at least 2 points, got {pts.shape[0]}")
    pts = _collapse_duplicates(pts)
    if pts.shape[0] < 2:
        raise DegenerateGeometryError("cannot fit a curve through identical points")
    chord = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    u = np.concatenate([[0.0], np.cumsum(chord)])
    u /= u[-1]
    k = min(3, pts.shape[0] - 1)
    return SplineCurve(spline=make_interp_spline(u, pts, k=k), degree=k)


def interpolate_even(curve: SplineCurve, n: int) -> np.ndarray:
    """Evaluate the curve at the n midpoint parameters (i + 0.5) / n.

    Matches the midpoint convention of sample_frame_timestamps so the
    i-th location corresponds to the i-th frame pair of the segment.
    """
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    params = (np.arange(n) + 0.5) / n
    return np.atleast_2d(curve.evaluate(params))


def generate_frame_pairs(
    matches: list[TurningPointMatch],
    tps_a: TurningPointSet,
    tps_b: TurningPointSet,
    duration_a: float,
    duration_b: float,
) -> list[FramePair]:
    """Generate frame pairs with ground-truth locations for a matched pair.

    Trajectory A must already be aligned into B's frame (alignment does
    not change the output: ground-truth locations are interpolated from
    trajectory B's keyframes, B being the reference frame).

    For each segment pair: n = frame_count(T1, T2) timestamps are sampled
    at part midpoints, and locations come from evenly interpolating the
    B-spline through B's keyframe positions between the segment's turning
    points. A segment whose reference keyframes collapse to a single point
    falls back to the straight line between its turning-point positions
    and is flagged.
    """
    segments = split_segments(matches, tps_a, tps_b, duration_a, duration_b)
    kf_b = tps_b.keyframe_indices
    pos_b = tps_b.trajectory.positions
    pairs: list[FramePair] = []
    for seg_idx, seg in enumerate(segments):
        n = frame_count(seg.duration_a, seg.duration_b)
        timestamps = sample_frame_timestamps(seg, n)
        start_kf = int(kf_b[seg.match_start.index_b])
        end_kf = int(kf_b[seg.match_end.index_b])
        span = pos_b[start_kf : end_kf + 1]
        fallback = False
        try:
            curve = fit_bspline(span)
            locations = interpolate_even(curve, n)
        except DegenerateGeometryError:
            fallback = True
            p0, p1 = pos_b[start_kf], pos_b[end_kf]
            mids = (np.arange(n) + 0.5) / n
            locations = p0 + np.outer(mids, p1 - p0)
        for i, ((t_a, t_b), loc) in enumerate(zip(timestamps, locations)):
            pairs.append(
                FramePair(
                    timestamp_a=t_a,
                    timestamp_b=t_b,
                    location=loc,
                    segment=seg_idx,
                    index=i,
                    fallback=fallback,
                )
            )
    return pairs


FRAME_PAIR_HEADER = ["segment", "idx", "timestamp_a", "timestamp_b", "x", "y", "fallback_flag"]


def format_frame_pairs_csv(pairs: list[FramePair]) -> str:
    """Serialize frame pairs to the manifest CSV (deterministic formatting)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(FRAME_PAIR_HEADER)
    for p in pairs:
        writer.writerow(
            [
                p.segment,
                p.index,
                repr(p.timestamp_a),
                repr(p.timestamp_b),
                repr(float(p.location[0])),
                repr(float(p.location[1])),
                int(p.fallback),
            ]
        )
    return out.getvalue()


def write_frame_pairs_csv(pairs: list[FramePair], path: str | Path) -> None:
    Path(path).write_text(format_frame_pairs_csv(pairs), encoding="utf-8")


def read_frame_pairs_csv(path: str | Path) -> list[FramePair]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != FRAME_PAIR_HEADER:
            raise ValidationError(f"unexpected frame pair header: {header}")
        return [
            FramePair(
                segment=int(row[0]),
                index=int(row[1]),
                timestamp_a=float(row[2]),
                timestamp_b=float(row[3]),
                location=np.array([float(row[4]), float(row[5])]),
                fallback=bool(int(row[6])),
            )
            for row in reader
        ]

"""Turning-point correspondence and least-squares trajectory alignment.

Two traversals of the same route are matched at their turning points:
an order-preserving dynamic-programming alignment proposes pairs, a human
annotator corrects them, and the surviving correspondences feed a
least-squares fit of the transform that maps trajectory A's coordinate
frame into trajectory B's. B is always the reference ("database") frame.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateGeometryError, ValidationError
from .trajectory import Trajectory, cumulative_arclength
from .turning import TurningPointSet

DEFAULT_ANGLE_WEIGHT = 0.25  # weight of the angle term in the pairing cost
DEFAULT_GAP_PENALTY = 0.15  # cost of leaving one interior turning point unmatched


class MatchStatus(str, enum.Enum):
    PROPOSED = "proposed"
    CONFIRMED = "confirmed"
    CORRECTED = "corrected"
    REJECTED = "rejected"


class TransformModel(str, enum.Enum):
    AFFINE = "affine"
    SIMILARITY = "similarity"


@dataclass(frozen=True)
class TurningPointMatch:
    """A correspondence between turning points of two trajectories.

    ``index_a`` and ``index_b`` are positions in the respective
    TurningPointSet lists (not keyframe indices).
    """

    index_a: int
    index_b: int
    status: MatchStatus = MatchStatus.PROPOSED

    def __post_init__(self):
        if self.index_a < 0 or self.index_b < 0:
            raise ValidationError("match indices must be non-negative")


def active_matches(matches: list[TurningPointMatch]) -> list[TurningPointMatch]:
    """Matches that participate in alignment (everything except rejected)."""
    return [m for m in matches if m.status is not MatchStatus.REJECTED]


def check_monotonic(matches: list[TurningPointMatch]) -> None:
    """Validate order preservation over the non-rejected matches.

    Raises ValidationError naming the first conflicting pair.
    """
    act = active_matches(matches)
    for prev, cur in zip(act, act[1:]):
        if cur.index_a <= prev.index_a or cur.index_b <= prev.index_b:
            raise ValidationError(
                f"match ({cur.index_a}, {cur.index_b}) breaks order preservation "
                f"against pair ({prev.index_a}, {prev.index_b})"
            )


def _arc_fractions(tps: TurningPointSet) -> np.ndarray:
    """Cumulative arc-length fraction of each turning point along its trajectory."""
    cum = cumulative_arclength(tps.trajectory.positions)
    total = cum[-1]
    if total == 0.0:
        raise ValidationError("trajectory has zero polyline length")
    return cum[tps.keyframe_indices] / total


def propose_matches(
    tps_a: TurningPointSet,
    tps_b: TurningPointSet,
    angle_weight: float = DEFAULT_ANGLE_WEIGHT,
    gap_penalty: float = DEFAULT_GAP_PENALTY,
) -> list[TurningPointMatch]:
    """Propose an order-preserving turning-point matching between two sets.

    Endpoints are matched to endpoints. Interior points are aligned by
    dynamic programming minimizing the total cost over order-preserving
    assignments, where pairing point i of A with point j of B costs
    ``|arcfrac_a(i) - arcfrac_b(j)| + angle_weight * |angle_a - angle_b| / 180``
    and leaving a point unmatched costs ``gap_penalty``. Arc fractions are
    cumulative arc length to the turning point divided by the total
    trajectory length, so the proposal is insensitive to traversal speed.

    All returned matches have status ``proposed``.
    """
    frac_a = _arc_fractions(tps_a)
    frac_b = _arc_fractions(tps_b)
    na, nb = len(tps_a), len(tps_b)
    if na < 2 or nb < 2:
        raise ValidationError("both turning point sets must include virtual endpoints")

    def cost(i: int, j: int) -> float:
        c = abs(frac_a[i] - frac_b[j])
        ang_a = tps_a.points[i].angle_deg
        ang_b = tps_b.points[j].angle_deg
        if ang_a is not None and ang_b is not None:
            c += angle_weight * abs(ang_a - ang_b) / 180.0
        return c

    # DP over the interior points only; endpoints are forced
    m, n = na - 2, nb - 2
    dp = np.zeros((m + 1, n + 1))
    dp[1:, 0] = gap_penalty * np.arange(1, m + 1)
    dp[0, 1:] = gap_penalty * np.arange(1, n + 1)
    choice = np.zeros((m + 1, n + 1), dtype=np.int8)  # 0=diag, 1=skip A, 2=skip B
    choice[1:, 0] = 1
    choice[0, 1:] = 2
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            best = dp[i - 1, j - 1] + cost(i, j)
            pick = 0
            if dp[i - 1, j] + gap_penalty < best:
                best = dp[i - 1, j] + gap_penalty
                pick = 1
            if dp[i, j - 1] + gap_penalty < best:
                best = dp[i, j - 1] + gap_penalty
                pick = 2
            dp[i, j] = best
            choice[i, j] = pick

    pairs: list[tuple[int, int]] = []
    i, j = m, n
    while i > 0 or j > 0:
        pick = choice[i, j]
        if pick == 0:
            pairs.append((i, j))
            i -= 1
            j -= 1
        elif pick == 1:
            i -= 1
        else:
            j -= 1
    pairs.reverse()

    matches = [TurningPointMatch(0, 0)]
    matches.extend(TurningPointMatch(i, j) for i, j in pairs)
    matches.append(TurningPointMatch(na - 1, nb - 1))
    check_monotonic(matches)
    return matches


@dataclass(frozen=True)
class Correction:
    """One annotator action on a match list.

    kind 'set': move match at ``position`` to ``index_b`` (same index_b
    confirms the proposal); 'add': insert the pair (index_a, index_b) as
    confirmed, reviving an identical rejected pair if present; 'reject':
    mark the match at ``position`` rejected.
    """

    kind: str  # 'set' | 'add' | 'reject'
    position: int | None = None
    index_a: int | None = None
    index_b: int | None = None

    def __post_init__(self):
        if self.kind not in ("set", "add", "reject"):
            raise ValidationError(f"unknown correction kind {self.kind!r}")
        if self.kind in ("set", "reject") and self.position is None:
            raise ValidationError(f"correction {self.kind!r} requires a match position")
        if self.kind == "set" and self.index_b is None:
            raise ValidationError("correction 'set' requires index_b")
        if self.kind == "add" and (self.index_a is None or self.index_b is None):
            raise ValidationError("correction 'add' requires index_a and index_b")

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        for k in ("position", "index_a", "index_b"):
            v = getattr(self, k)
            if v is not None:
                d[k] = v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Correction":
        return cls(
            kind=d["kind"],
            position=d.get("position"),
            index_a=d.get("index_a"),
            index_b=d.get("index_b"),
        )


def apply_correction(
    matches: list[TurningPointMatch], correction: Correction
) -> list[TurningPointMatch]:
    """Apply one annotator correction, returning a new match list.

    Order preservation is re-validated over the non-rejected matches; a
    violating correction raises ValidationError naming the conflicting
    pair and leaves the input untouched.
    """
    updated = list(matches)
    if correction.kind in ("set", "reject"):
        pos = correction.position
        if pos is None or not (0 <= pos < len(updated)):
            raise ValidationError(f"no match at position {pos}")
    if correction.kind == "set":
        target = updated[correction.position]
        status = (
            MatchStatus.CONFIRMED
            if correction.index_b == target.index_b
            else MatchStatus.CORRECTED
        )
        updated[correction.position] = replace(target, index_b=correction.index_b, status=status)
    elif correction.kind == "reject":
        updated[correction.position] = replace(
            updated[correction.position], status=MatchStatus.REJECTED
        )
    else:  # add
        pair = (correction.index_a, correction.index_b)
        for k, m in enumerate(updated):
            if (m.index_a, m.index_b) == pair:
                if m.status is not MatchStatus.REJECTED:
                    raise ValidationError(f"pair {pair} already present and active")
                updated[k] = replace(m, status=MatchStatus.CONFIRMED)
                break
        else:
            insert_at = len(updated)
            for k, m in enumerate(updated):
                if m.index_a > correction.index_a:
                    insert_at = k
                    break
            updated.insert(
                insert_at,
                TurningPointMatch(correction.index_a, correction.index_b, MatchStatus.CONFIRMED),
            )
    check_monotonic(updated)
    return updated


@dataclass(frozen=True)
class AlignmentTransform:
    """Homogeneous 2D transform mapping trajectory A's frame into B's.

    ``matrix`` is 3x3 acting on column vectors [x, y, 1]^T with last row
    exactly [0, 0, 1]. For the similarity model the upper-left 2x2 block
    is a positive scalar multiple of a rotation matrix.
    """

    matrix: np.ndarray
    model: TransformModel
    rms_residual: float
    point_count: int

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        if mat.shape != (3, 3):
            raise ValidationError(f"transform matrix must be 3x3, got {mat.shape}")
        if not np.array_equal(mat[2], [0.0, 0.0, 1.0]):
            raise ValidationError("transform matrix last row must be exactly [0, 0, 1]")
        minimum = 3 if self.model is TransformModel.AFFINE else 2
        if self.point_count < minimum:
            raise ValidationError(
                f"{self.model.value} transform needs >= {minimum} points, "
                f"got {self.point_count}"
            )
        if self.model is TransformModel.SIMILARITY:
            block = mat[:2, :2]
            scale2 = float(block[:, 0] @ block[:, 0])
            if np.linalg.det(block) <= 0:
                raise ValidationError("similarity block must have positive determinant")
            if (
                abs(block[:, 0] @ block[:, 1]) > 1e-9 * max(scale2, 1.0)
                or abs(block[:, 0] @ block[:, 0] - block[:, 1] @ block[:, 1])
                > 1e-9 * max(scale2, 1.0)
            ):
                raise ValidationError(
                    "similarity block must be a scalar multiple of a rotation"
                )
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map (n, 2) points (or one 2-vector) through the transform."""
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        out = pts @ self.matrix[:2, :2].T + self.matrix[:2, 2]
        return out[0] if single else out

    def inverse(self) -> "AlignmentTransform":
        inv = np.linalg.inv(self.matrix)
        inv[2] = [0.0, 0.0, 1.0]  # clear numerical noise
        return AlignmentTransform(inv, self.model, self.rms_residual, self.point_count)


def _check_affine_nondegenerate(src: np.ndarray) -> None:
    centered = src - src.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    if s[0] == 0.0 or s[-1] <= 1e-10 * s[0]:
        raise DegenerateGeometryError(
            "affine fit needs at least 3 non-collinear source points"
        )


def fit_transform(
    src_points: np.ndarray,
    dst_points: np.ndarray,
    model: TransformModel | str = TransformModel.AFFINE,
) -> AlignmentTransform:
    """Least-squares fit of the transform sending ``src_points`` to ``dst_points``.

    The affine model minimizes the sum of squared residuals of the
    homogeneous linear system via an orthogonal decomposition; the
    similarity model (rotation + uniform scale + translation, no
    reflection) has a closed-form solution. ``rms_residual`` is
    sqrt(mean squared residual norm) over the point pairs.

    Raises:
        DegenerateGeometryError: collinear sources (affine) or coincident
            sources (similarity); the caller may retry with the other model.
    """
    model = TransformModel(model)
    src = np.asarray(src_points, dtype=float)
    dst = np.asarray(dst_points, dtype=float)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 2:
        raise ValidationError(
            f"expected matching (n, 2) point arrays, got {src.shape} and {dst.shape}"
        )
    n = src.shape[0]
    matrix = np.eye(3)
    if model is TransformModel.AFFINE:
        if n < 3:
            raise DegenerateGeometryError(f"affine fit needs >= 3 point pairs, got {n}")
        _check_affine_nondegenerate(src)
        x_h = np.column_stack([src, np.ones(n)])
        coeffs, *_ = np.linalg.lstsq(x_h, dst, rcond=None)  # (3, 2)
        matrix[:2, :2] = coeffs[:2].T
        matrix[:2, 2] = coeffs[2]
    else:
        if n < 2:
            raise DegenerateGeometryError(f"similarity fit needs >= 2 point pairs, got {n}")
        mean_src = src.mean(axis=0)
        mean_dst = dst.mean(axis=0)
        ca = (src - mean_src).view(complex).ravel()
        cb = (dst - mean_dst).view(complex).ravel()
        denom = float(np.sum(np.abs(ca) ** 2))
        if denom == 0.0:
            raise DegenerateGeometryError("similarity fit needs >= 2 distinct source points")
        alpha = complex(np.sum(np.conj(ca) * cb) / denom)
        if abs(alpha) == 0.0:
            raise DegenerateGeometryError(
                "similarity fit degenerate: best-fit scale is zero"
            )
        a, b = alpha.real, alpha.imag
        matrix[:2, :2] = [[a, -b], [b, a]]
        matrix[:2, 2] = mean_dst - matrix[:2, :2] @ mean_src

    residuals = src @ matrix[:2, :2].T + matrix[:2, 2] - dst
    rms = float(np.sqrt(np.mean(np.sum(residuals**2, axis=1))))
    return AlignmentTransform(matrix=matrix, model=model, rms_residual=rms, point_count=n)


def fit_transform_from_matches(
    matches: list[TurningPointMatch],
    tps_a: TurningPointSet,
    tps_b: TurningPointSet,
    model: TransformModel | str = TransformModel.AFFINE,
) -> AlignmentTransform:
    """Fit the A-to-B transform from the non-rejected turning-point matches."""
    act = active_matches(matches)
    idx_a = tps_a.keyframe_indices
    idx_b = tps_b.keyframe_indices
    src = tps_a.trajectory.positions[[idx_a[m.index_a] for m in act]]
    dst = tps_b.trajectory.positions[[idx_b[m.index_b] for m in act]]
    return fit_transform(src, dst, model)


def align_trajectory(traj: Trajectory, transform: AlignmentTransform) -> Trajectory:
    """Map every keyframe position through the transform; timestamps unchanged."""
    return traj.with_positions(transform.apply(traj.positions))


def format_matches(
    matches: list[TurningPointMatch],
    tps_a: TurningPointSet,
    tps_b: TurningPointSet,
) -> str:
    """Render a match list as the text document the CLI writes.

    Per line: set positions, status, keyframe indices, and timestamps.
    """
    ts_a = tps_a.trajectory.timestamps
    ts_b = tps_b.trajectory.timestamps
    idx_a = tps_a.keyframe_indices
    idx_b = tps_b.keyframe_indices
    lines = ["# index_a index_b status keyframe_a keyframe_b timestamp_a timestamp_b"]
    for m in matches:
        ka = int(idx_a[m.index_a])
        kb = int(idx_b[m.index_b])
        lines.append(
            f"{m.index_a} {m.index_b} {m.status.value} {ka} {kb} "
            f"{float(ts_a[ka])!r} {float(ts_b[kb])!r}"
        )
    return "\n".join(lines) + "\n"

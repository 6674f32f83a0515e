"""Synthetic trajectory pairs with known ground truth.

A synthetic route is a polyline of corner points. Traversals walk the
route with a chosen speed profile, emit keyframes at a fixed rate, add
positional Gaussian noise, and record for every keyframe the true route
arc-length fraction it was sampled at. That correspondence map, together
with the route geometry itself, is the oracle the rest of the pipeline is
tested against: true turning-point matches, the true transform between
traversals (identity), and true frame-pair locations are all known.

Everything is deterministic for a fixed seed.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .errors import GenerationError, ValidationError
from .trajectory import SceneManifest, Trajectory, VisitEntry, cumulative_arclength
from .turning import turn_angle

_ROUTE_ATTEMPTS = 200
_STEP_ATTEMPTS = 50


class SpeedProfile(str, enum.Enum):
    CONSTANT = "constant"
    PIECEWISE = "piecewise"
    SINUSOIDAL = "sinusoidal"


@dataclass(frozen=True)
class SyntheticRoute:
    """A ground-truth route polyline."""

    corners: np.ndarray  # (m, 2)
    turn_angles_deg: np.ndarray  # (m - 2,) interior corner angles

    def __post_init__(self):
        corners = np.asarray(self.corners, dtype=float)
        if corners.ndim != 2 or corners.shape[1] != 2 or corners.shape[0] < 2:
            raise ValidationError(f"route needs >= 2 corner points, got shape {corners.shape}")
        if np.any(np.all(np.diff(corners, axis=0) == 0.0, axis=1)):
            raise ValidationError("consecutive route corners must be distinct")
        corners.setflags(write=False)
        object.__setattr__(self, "corners", corners)
        object.__setattr__(self, "turn_angles_deg", np.asarray(self.turn_angles_deg, dtype=float))

    @property
    def total_length(self) -> float:
        return float(cumulative_arclength(self.corners)[-1])

    @property
    def corner_fractions(self) -> np.ndarray:
        """Arc-length fraction of every corner, endpoints included."""
        cum = cumulative_arclength(self.corners)
        return cum / cum[-1]

    def position_at(self, fraction: float | np.ndarray) -> np.ndarray:
        """True route position at arc-length fraction(s) in [0, 1]."""
        frac = np.clip(np.asarray(fraction, dtype=float), 0.0, 1.0)
        cum = cumulative_arclength(self.corners)
        s = frac * cum[-1]
        x = np.interp(s, cum, self.corners[:, 0])
        y = np.interp(s, cum, self.corners[:, 1])
        return np.stack([x, y], axis=-1)

    def distance_to(self, points: np.ndarray) -> np.ndarray:
        """Distance from each point to the route polyline."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        best = np.full(pts.shape[0], np.inf)
        for a, b in zip(self.corners, self.corners[1:]):
            ab = b - a
            t = np.clip((pts - a) @ ab / float(ab @ ab), 0.0, 1.0)
            proj = a + np.outer(t, ab)
            best = np.minimum(best, np.linalg.norm(pts - proj, axis=1))
        return best


def generate_route(
    num_corners: int,
    bounds: tuple[float, float, float, float] = (0.0, 0.0, 100.0, 100.0),
    min_turn_deg: float = 45.0,
    seed: int = 0,
) -> SyntheticRoute:
    """Generate a random route whose interior turn angles all exceed a minimum.

    ``bounds`` is (xmin, ymin, xmax, ymax). A random walk draws step
    lengths relative to the bounds size and turn angles in
    [min_turn_deg, 160] with random sign; candidates leaving the bounds
    or landing within 12% of the bounds size of an earlier corner are
    redrawn with a bounded retry budget, and the whole route restarts
    when a step budget is exhausted. The separation requirement is what
    makes overly many corners for a given bounds genuinely infeasible.

    Raises:
        GenerationError: constraints still unsatisfied after the retry budget.
    """
    if num_corners < 2:
        raise ValidationError(f"num_corners must be >= 2, got {num_corners}")
    xmin, ymin, xmax, ymax = bounds
    if xmax <= xmin or ymax <= ymin:
        raise ValidationError(f"empty bounds {bounds}")
    if not (0.0 < min_turn_deg < 160.0):
        raise ValidationError(f"min_turn_deg must be in (0, 160), got {min_turn_deg}")
    span = min(xmax - xmin, ymax - ymin)
    rng = np.random.default_rng(seed)

    min_separation = 0.12 * span

    def admissible(p: np.ndarray, earlier: list[np.ndarray]) -> bool:
        if not (xmin <= p[0] <= xmax and ymin <= p[1] <= ymax):
            return False
        return all(np.linalg.norm(p - q) >= min_separation for q in earlier)

    for _ in range(_ROUTE_ATTEMPTS):
        start = np.array(
            [
                rng.uniform(xmin + 0.2 * (xmax - xmin), xmax - 0.2 * (xmax - xmin)),
                rng.uniform(ymin + 0.2 * (ymax - ymin), ymax - 0.2 * (ymax - ymin)),
            ]
        )
        heading = rng.uniform(0.0, 2.0 * np.pi)
        corners = [start]
        ok = True
        for _ in range(num_corners - 1):
            placed = False
            for _ in range(_STEP_ATTEMPTS):
                turn = 0.0
                if len(corners) > 1:
                    turn = np.radians(rng.uniform(min_turn_deg, 160.0)) * rng.choice([-1.0, 1.0])
                step = rng.uniform(0.15, 0.3) * span
                cand_heading = heading + turn
                cand = corners[-1] + step * np.array(
                    [np.cos(cand_heading), np.sin(cand_heading)]
                )
                if admissible(cand, corners):
                    corners.append(cand)
                    heading = cand_heading
                    placed = True
                    break
            if not placed:
                ok = False
                break
        if not ok:
            continue
        corner_arr = np.array(corners)
        angles = np.array(
            [
                turn_angle(corner_arr[i - 1], corner_arr[i], corner_arr[i + 1])
                for i in range(1, num_corners - 1)
            ]
        )
        if np.all(angles >= min_turn_deg):
            return SyntheticRoute(corners=corner_arr, turn_angles_deg=angles)
    raise GenerationError(
        f"could not place {num_corners} corners with min turn {min_turn_deg} deg "
        f"within bounds {bounds} after {_ROUTE_ATTEMPTS} attempts"
    )


def _fraction_of_time(
    profile: SpeedProfile, duration: float, rng: np.random.Generator
):
    """Build fraction(t): integrated speed profile normalized to [0, 1].

    Returns the (vectorized) function; drawing profile parameters consumes
    the generator, keeping traversals reproducible per seed.
    """
    if profile is SpeedProfile.CONSTANT:
        return lambda t: np.asarray(t, dtype=float) / duration
    if profile is SpeedProfile.PIECEWISE:
        speeds = rng.uniform(0.5, 1.5, size=4)
        knot_t = np.linspace(0.0, duration, 5)
        knot_s = np.concatenate([[0.0], np.cumsum(speeds * np.diff(knot_t))])
        total = knot_s[-1]
        return lambda t: np.interp(t, knot_t, knot_s) / total
    phase = rng.uniform(0.0, 2.0 * np.pi)
    omega = 2.0 * np.pi / duration
    amp = 0.5

    def fraction(t):
        t = np.asarray(t, dtype=float)
        integral = t + (amp / omega) * (np.cos(phase) - np.cos(omega * t + phase))
        norm = duration + (amp / omega) * (np.cos(phase) - np.cos(omega * duration + phase))
        return integral / norm

    return fraction


@dataclass(frozen=True)
class SyntheticTraversal:
    """A trajectory plus its true keyframe-to-route correspondence."""

    trajectory: Trajectory
    fractions: np.ndarray  # per-keyframe route arc-length fraction
    speed_profile: SpeedProfile
    keyframe_rate: float
    noise_sigma: float
    seed: int

    def __post_init__(self):
        frac = np.asarray(self.fractions, dtype=float)
        if frac.shape[0] != len(self.trajectory):
            raise ValidationError("one correspondence fraction per keyframe required")
        if np.any(np.diff(frac) < 0) or frac[0] < 0 or frac[-1] > 1:
            raise ValidationError("correspondence fractions must be non-decreasing in [0, 1]")
        frac.setflags(write=False)
        object.__setattr__(self, "fractions", frac)


def traverse(
    route: SyntheticRoute,
    duration: float,
    keyframe_rate: float,
    speed_profile: SpeedProfile | str = SpeedProfile.CONSTANT,
    noise_sigma: float = 0.0,
    seed: int = 0,
    visit_id: str = "",
    include_corner_keyframes: bool = False,
) -> SyntheticTraversal:
    """Walk the route once, emitting keyframes at a fixed rate.

    Keyframes sit on a 1/rate time grid (plus the final timestamp at
    ``duration``); positions are the route point at the speed-profile's
    integrated arc fraction plus isotropic Gaussian noise.

    With ``include_corner_keyframes`` an extra keyframe is inserted at the
    exact passage time of every route corner, mimicking a SLAM system
    inserting keyframes under rapid rotation. This pins corner keyframes
    exactly onto the corners, which noise-free recovery tests rely on.
    """
    profile = SpeedProfile(speed_profile)
    if duration <= 0 or keyframe_rate <= 0:
        raise ValidationError("duration and keyframe_rate must be positive")
    if noise_sigma < 0:
        raise ValidationError(f"noise_sigma must be >= 0, got {noise_sigma}")
    rng = np.random.default_rng(seed)
    fraction_of = _fraction_of_time(profile, duration, rng)

    times = np.arange(int(np.floor(duration * keyframe_rate)) + 1) / keyframe_rate
    if duration - times[-1] > 1e-9 / keyframe_rate:
        times = np.append(times, duration)
    fractions = np.asarray(fraction_of(times), dtype=float)

    if include_corner_keyframes:
        entries = list(zip(times.tolist(), fractions.tolist()))
        for corner_frac in route.corner_fractions[1:-1]:
            t_corner = float(
                brentq(lambda t: float(fraction_of(t)) - corner_frac, 0.0, duration)
            )
            entries = [(t, f) for t, f in entries if abs(t - t_corner) > 1e-9]
            entries.append((t_corner, float(corner_frac)))
        entries.sort()
        times = np.array([t for t, _ in entries])
        fractions = np.array([f for _, f in entries])

    if times.shape[0] < 2:
        raise ValidationError("duration and rate yield fewer than 2 keyframes")
    positions = route.position_at(fractions)
    if noise_sigma > 0:
        positions = positions + rng.normal(0.0, noise_sigma, size=positions.shape)
    trajectory = Trajectory(
        scene_id="synthetic",
        visit_id=visit_id,
        timestamps=times,
        positions=positions,
        source_path=f"synthetic:seed={seed}",
    )
    return SyntheticTraversal(
        trajectory=trajectory,
        fractions=fractions,
        speed_profile=profile,
        keyframe_rate=keyframe_rate,
        noise_sigma=noise_sigma,
        seed=seed,
    )


@dataclass(frozen=True)
class TrueMatching:
    """Ground-truth corner correspondence between two traversals of a route."""

    route: SyntheticRoute
    corner_keyframes_a: np.ndarray  # keyframe index per route corner
    corner_keyframes_b: np.ndarray

    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.corner_keyframes_a.tolist(), self.corner_keyframes_b.tolist()))


def true_matching(
    traversal_a: SyntheticTraversal,
    traversal_b: SyntheticTraversal,
    route: SyntheticRoute,
) -> TrueMatching:
    """True corner correspondence: per corner, the keyframe of each traversal
    whose correspondence fraction is closest to the corner's fraction.

    ``route.position_at`` doubles as the location oracle mapping any arc
    fraction to the true route position.
    """
    corner_fracs = route.corner_fractions

    def closest(fractions: np.ndarray) -> np.ndarray:
        return np.array(
            [int(np.argmin(np.abs(fractions - f))) for f in corner_fracs], dtype=int
        )

    return TrueMatching(
        route=route,
        corner_keyframes_a=closest(traversal_a.fractions),
        corner_keyframes_b=closest(traversal_b.fractions),
    )


def write_synthetic_pair(
    out_dir: str | Path,
    route: SyntheticRoute,
    traversal_a: SyntheticTraversal,
    traversal_b: SyntheticTraversal,
    duration_a: float,
    duration_b: float,
    scene_id: str = "synthetic",
) -> Path:
    """Write a traversal pair in the formats the pipeline ingests.

    Emits ``a.csv``/``b.csv`` trajectories, a ``manifest.yaml`` pairing
    them, and ``truth.json`` with the route corners and per-keyframe
    fractions for test tooling. Returns the manifest path.
    """
    from .trajectory import save_scene_manifest, serialize_trajectory

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    serialize_trajectory(traversal_a.trajectory, out / "a.csv")
    serialize_trajectory(traversal_b.trajectory, out / "b.csv")
    manifest = SceneManifest(
        scene_id=scene_id,
        visits=(
            VisitEntry(visit_id="a", trajectory_path="a.csv", duration=duration_a),
            VisitEntry(visit_id="b", trajectory_path="b.csv", duration=duration_b),
        ),
        pairings=(("a", "b"),),
        base_dir=out,
    )
    manifest_path = out / "manifest.yaml"
    save_scene_manifest(manifest, manifest_path)
    truth = {
        "corners": route.corners.tolist(),
        "corner_fractions": route.corner_fractions.tolist(),
        "turn_angles_deg": route.turn_angles_deg.tolist(),
        "fractions_a": traversal_a.fractions.tolist(),
        "fractions_b": traversal_b.fractions.tolist(),
    }
    (out / "truth.json").write_text(json.dumps(truth, indent=2) + "\n", encoding="utf-8")
    return manifest_path

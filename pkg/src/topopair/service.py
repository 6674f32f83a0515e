"""Annotation sessions: persistent human-in-the-loop match review.

A session wraps one trajectory pair: the auto-detected turning points,
the proposed matches, and every annotator correction applied since. The
corrections annotators submit live in the keyframe domain (pick keyframe
k of trajectory B for this match), so the service resolves them onto the
turning-point sets, inserting or moving points where needed, before
delegating to the matching module's correction logic.

State is file-backed, one directory per session: the immutable initial
proposal plus an append-only correction log. The in-memory match list is
always the proposal replayed through the log, so replaying the audit log
reproduces the session exactly by construction. Concurrent edits are
serialized by an optimistic integer version.
"""

from __future__ import annotations

import enum
import json
import os
import tempfile
import threading
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

from .config import PipelineConfig
from .errors import (
    DegenerateGeometryError,
    NotFoundError,
    StateError,
    ValidationError,
    VersionConflictError,
)
from .groundtruth import generate_frame_pairs, write_frame_pairs_csv
from .matching import (
    Correction,
    MatchStatus,
    TurningPointMatch,
    align_trajectory,
    apply_correction,
    fit_transform_from_matches,
    format_matches,
)
from .trajectory import Trajectory, parse_trajectory
from .turning import (
    TurningPoint,
    TurningPointOrigin,
    TurningPointSet,
    detect_turning_points,
    format_turning_points,
)


class SessionStatus(str, enum.Enum):
    PROPOSED = "proposed"
    IN_REVIEW = "in_review"
    FINALIZED = "finalized"


@dataclass(frozen=True)
class SessionState:
    """The mutable-by-replacement part of a session: points and matches."""

    points_a: tuple[TurningPoint, ...]
    points_b: tuple[TurningPoint, ...]
    matches: tuple[TurningPointMatch, ...]

    def validated(self, traj_a: Trajectory, traj_b: Trajectory) -> "SessionState":
        """Check all turning-point-set and match invariants; returns self."""
        TurningPointSet(traj_a, self.points_a, epsilon=1.0, angle_threshold_deg=30.0)
        TurningPointSet(traj_b, self.points_b, epsilon=1.0, angle_threshold_deg=30.0)
        for m in self.matches:
            if not (0 <= m.index_a < len(self.points_a)):
                raise ValidationError(f"match index_a {m.index_a} out of range")
            if not (0 <= m.index_b < len(self.points_b)):
                raise ValidationError(f"match index_b {m.index_b} out of range")
        return self


def _point_position(points: tuple[TurningPoint, ...], keyframe_index: int) -> int | None:
    for pos, p in enumerate(points):
        if p.keyframe_index == keyframe_index:
            return pos
    return None


def _insert_point(
    points: tuple[TurningPoint, ...],
    new_point: TurningPoint,
    matches: tuple[TurningPointMatch, ...],
    side: str,
) -> tuple[tuple[TurningPoint, ...], int, tuple[TurningPointMatch, ...]]:
    """Insert a turning point in keyframe order, shifting match indices."""
    position = len(points)
    for pos, p in enumerate(points):
        if p.keyframe_index > new_point.keyframe_index:
            position = pos
            break
    updated_points = points[:position] + (new_point,) + points[position:]
    shifted = []
    for m in matches:
        if side == "a" and m.index_a >= position:
            m = replace(m, index_a=m.index_a + 1)
        elif side == "b" and m.index_b >= position:
            m = replace(m, index_b=m.index_b + 1)
        shifted.append(m)
    return updated_points, position, tuple(shifted)


def apply_wire_correction(
    state: SessionState, wire: dict, traj_a: Trajectory, traj_b: Trajectory
) -> SessionState:
    """Apply one keyframe-domain correction, returning the new state.

    Wire actions:
      confirm: {"action": "confirm", "position": k}
      set:     {"action": "set", "position": k, "keyframe_b": kb}
      add:     {"action": "add", "keyframe_a": ka, "keyframe_b": kb}
      reject:  {"action": "reject", "position": k}

    Raises ValidationError (leaving the input state untouched) when the
    correction is malformed or breaks an invariant.
    """
    action = wire.get("action")
    points_a, points_b, matches = state.points_a, state.points_b, state.matches

    def require_position() -> int:
        pos = wire.get("position")
        if not isinstance(pos, int) or not (0 <= pos < len(matches)):
            raise ValidationError(f"no match at position {pos}")
        return pos

    if action == "confirm":
        pos = require_position()
        corr = Correction("set", position=pos, index_b=matches[pos].index_b)
        new_matches = tuple(apply_correction(list(matches), corr))
        return SessionState(points_a, points_b, new_matches)

    if action == "reject":
        pos = require_position()
        new_matches = tuple(apply_correction(list(matches), Correction("reject", position=pos)))
        return SessionState(points_a, points_b, new_matches)

    if action == "set":
        pos = require_position()
        kb = wire.get("keyframe_b")
        if not isinstance(kb, int) or not (0 <= kb < len(traj_b)):
            raise ValidationError(f"keyframe_b {kb} out of range for trajectory B")
        old_kb = points_b[matches[pos].index_b].keyframe_index
        existing = _point_position(points_b, kb)
        if existing is None:
            # move this match's turning point to the chosen keyframe
            target = matches[pos]
            moved = TurningPoint(kb, None, TurningPointOrigin.MANUAL_MOVED)
            reordered = list(points_b)
            reordered[target.index_b] = moved
            order = sorted(range(len(reordered)), key=lambda i: reordered[i].keyframe_index)
            remap = {old: new for new, old in enumerate(order)}
            points_b = tuple(reordered[i] for i in order)
            matches = tuple(replace(m, index_b=remap[m.index_b]) for m in matches)
            index_b = remap[target.index_b]
        else:
            index_b = existing
        corr = Correction("set", position=pos, index_b=index_b)
        new_matches = list(apply_correction(list(matches), corr))
        # the position can be unchanged even though the keyframe moved;
        # a changed keyframe is a correction, not a confirmation
        if kb != old_kb and new_matches[pos].status is MatchStatus.CONFIRMED:
            new_matches[pos] = replace(new_matches[pos], status=MatchStatus.CORRECTED)
        return SessionState(points_a, points_b, tuple(new_matches)).validated(traj_a, traj_b)

    if action == "add":
        ka, kb = wire.get("keyframe_a"), wire.get("keyframe_b")
        if not isinstance(ka, int) or not (0 <= ka < len(traj_a)):
            raise ValidationError(f"keyframe_a {ka} out of range for trajectory A")
        if not isinstance(kb, int) or not (0 <= kb < len(traj_b)):
            raise ValidationError(f"keyframe_b {kb} out of range for trajectory B")
        pos_a = _point_position(points_a, ka)
        if pos_a is None:
            points_a, pos_a, matches = _insert_point(
                points_a, TurningPoint(ka, None, TurningPointOrigin.MANUAL_ADDED), matches, "a"
            )
        pos_b = _point_position(points_b, kb)
        if pos_b is None:
            points_b, pos_b, matches = _insert_point(
                points_b, TurningPoint(kb, None, TurningPointOrigin.MANUAL_ADDED), matches, "b"
            )
        corr = Correction("add", index_a=pos_a, index_b=pos_b)
        new_matches = tuple(apply_correction(list(matches), corr))
        return SessionState(points_a, points_b, new_matches).validated(traj_a, traj_b)

    raise ValidationError(f"unknown correction action {action!r}")


@dataclass
class AnnotationSession:
    """One annotation session: trajectory pair, state, and audit trail."""

    session_id: str
    scene_id: str
    traj_a_path: str
    traj_b_path: str
    duration_a: float
    duration_b: float
    params: PipelineConfig
    traj_a: Trajectory
    traj_b: Trajectory
    state: SessionState
    status: SessionStatus = SessionStatus.PROPOSED
    version: int = 1
    audit: list[dict] = field(default_factory=list)
    artifact_paths: list[str] = field(default_factory=list)

    @property
    def tps_a(self) -> TurningPointSet:
        return TurningPointSet(
            self.traj_a,
            self.state.points_a,
            epsilon=self.params.epsilon or 0.0,
            angle_threshold_deg=self.params.angle_threshold_deg,
        )

    @property
    def tps_b(self) -> TurningPointSet:
        return TurningPointSet(
            self.traj_b,
            self.state.points_b,
            epsilon=self.params.epsilon or 0.0,
            angle_threshold_deg=self.params.angle_threshold_deg,
        )


@dataclass(frozen=True)
class Candidate:
    keyframe_index: int
    timestamp: float
    position: tuple[float, float]
    image_url: str | None


@dataclass(frozen=True)
class CandidateWindow:
    """Keyframes of trajectory B an annotator may pick for one match."""

    match_position: int
    target_keyframe_a: Candidate
    proposed_keyframe_b: int
    candidates: tuple[Candidate, ...]


def _point_to_dict(p: TurningPoint) -> dict:
    return {
        "keyframe_index": p.keyframe_index,
        "angle_deg": p.angle_deg,
        "origin": p.origin.value,
    }


def _point_from_dict(d: dict) -> TurningPoint:
    return TurningPoint(
        keyframe_index=int(d["keyframe_index"]),
        angle_deg=None if d["angle_deg"] is None else float(d["angle_deg"]),
        origin=TurningPointOrigin(d["origin"]),
    )


def _match_to_dict(m: TurningPointMatch) -> dict:
    return {"index_a": m.index_a, "index_b": m.index_b, "status": m.status.value}


def _match_from_dict(d: dict) -> TurningPointMatch:
    return TurningPointMatch(int(d["index_a"]), int(d["index_b"]), MatchStatus(d["status"]))


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class AnnotationStore:
    """File-backed session storage plus the session operations.

    One directory per session under ``data_dir``:
      session.json    immutable metadata + lifecycle status
      proposal.json   the initial turning points and proposed matches
      corrections.log one JSON object per line, append-only
      artifacts/      finalized outputs
    """

    def __init__(self, data_dir: str | Path, media_root: str | Path | None = None):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.media_root = None if media_root is None else Path(media_root)
        self._sessions: dict[str, AnnotationSession] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._store_lock = threading.Lock()

    # -- lifecycle ---------------------------------------------------------

    def create_session(
        self,
        scene_id: str,
        traj_a_path: str | Path,
        traj_b_path: str | Path,
        duration_a: float,
        duration_b: float,
        params: PipelineConfig | None = None,
        visit_a: str = "a",
        visit_b: str = "b",
    ) -> AnnotationSession:
        """Parse the pair, detect turning points, propose matches, persist.

        Everything is validated before any directory is created: a failed
        creation leaves no session behind.
        """
        params = params or PipelineConfig()
        traj_a = parse_trajectory(traj_a_path, scene_id=scene_id, visit_id=visit_a)
        traj_b = parse_trajectory(traj_b_path, scene_id=scene_id, visit_id=visit_b)
        for traj, duration, name in ((traj_a, duration_a, "A"), (traj_b, duration_b, "B")):
            if duration < float(traj.timestamps[-1]):
                raise ValidationError(
                    f"trajectory {name}: duration {duration} is shorter than the "
                    f"last keyframe timestamp {float(traj.timestamps[-1])}"
                )
        tps_a = detect_turning_points(traj_a, params.epsilon, params.angle_threshold_deg)
        tps_b = detect_turning_points(traj_b, params.epsilon, params.angle_threshold_deg)
        from .matching import propose_matches

        matches = propose_matches(
            tps_a, tps_b, angle_weight=params.angle_weight, gap_penalty=params.gap_penalty
        )
        session = AnnotationSession(
            session_id=uuid.uuid4().hex[:12],
            scene_id=scene_id,
            traj_a_path=str(traj_a_path),
            traj_b_path=str(traj_b_path),
            duration_a=duration_a,
            duration_b=duration_b,
            params=params,
            traj_a=traj_a,
            traj_b=traj_b,
            state=SessionState(tps_a.points, tps_b.points, tuple(matches)),
        )
        self._persist_new(session)
        with self._store_lock:
            self._sessions[session.session_id] = session
            self._locks[session.session_id] = threading.Lock()
        return session

    def get_session(self, session_id: str) -> AnnotationSession:
        with self._store_lock:
            if session_id in self._sessions:
                return self._sessions[session_id]
        session = self._load(session_id)
        with self._store_lock:
            self._sessions.setdefault(session_id, session)
            self._locks.setdefault(session_id, threading.Lock())
            return self._sessions[session_id]

    def list_sessions(self) -> list[str]:
        return sorted(
            p.name for p in self.data_dir.iterdir() if (p / "session.json").exists()
        )

    # -- operations --------------------------------------------------------

    def get_candidates(
        self, session_id: str, match_position: int, radius: int | None = None
    ) -> CandidateWindow:
        """Keyframes of B around the proposed match, clipped to the
        trajectory bounds and to the neighboring non-rejected matches."""
        session = self.get_session(session_id)
        radius = session.params.window_radius if radius is None else radius
        if radius < 1:
            raise ValidationError(f"radius must be >= 1, got {radius}")
        matches = session.state.matches
        if not (0 <= match_position < len(matches)):
            raise NotFoundError(f"no match at position {match_position}")
        match = matches[match_position]
        center = session.state.points_b[match.index_b].keyframe_index
        lo = max(0, center - radius)
        hi = min(len(session.traj_b) - 1, center + radius)
        for k, m in enumerate(matches):
            if m.status is MatchStatus.REJECTED or k == match_position:
                continue
            kf = session.state.points_b[m.index_b].keyframe_index
            if k < match_position:
                lo = max(lo, kf + 1)
            else:
                hi = min(hi, kf - 1)
        if lo > hi:
            raise ValidationError(
                f"no admissible candidates: window collapsed to [{lo}, {hi}]"
            )
        ka = session.state.points_a[match.index_a].keyframe_index
        return CandidateWindow(
            match_position=match_position,
            target_keyframe_a=self._candidate(session, "a", ka),
            proposed_keyframe_b=center,
            candidates=tuple(
                self._candidate(session, "b", k) for k in range(lo, hi + 1)
            ),
        )

    def submit_correction(
        self,
        session_id: str,
        wire: dict,
        expected_version: int,
        annotator: str = "anonymous",
    ) -> AnnotationSession:
        """Apply a correction under the optimistic version check."""
        session = self.get_session(session_id)
        with self._locks[session_id]:
            if session.status is SessionStatus.FINALIZED:
                raise StateError("session is finalized; reopen it to correct matches")
            if expected_version != session.version:
                raise VersionConflictError(expected_version, session.version)
            new_state = apply_wire_correction(
                session.state, wire, session.traj_a, session.traj_b
            )
            entry = {
                "seq": session.version,
                "annotator": annotator,
                "when": datetime.now(timezone.utc).isoformat(),
                "correction": wire,
            }
            self._append_log(session, entry)
            session.state = new_state
            session.version += 1
            session.audit.append(entry)
            if session.status is SessionStatus.PROPOSED:
                session.status = SessionStatus.IN_REVIEW
            self._persist_meta(session)
            return session

    def finalize_session(self, session_id: str) -> list[str]:
        """Fit, align, generate, and write the ground-truth artifacts.

        Requires every proposal resolved (confirmed, corrected, or
        rejected) and at least 2 surviving matches.
        """
        session = self.get_session(session_id)
        with self._locks[session_id]:
            if session.status is SessionStatus.FINALIZED:
                raise StateError("session is already finalized")
            pending = [
                k
                for k, m in enumerate(session.state.matches)
                if m.status is MatchStatus.PROPOSED
            ]
            if pending:
                raise StateError(
                    f"matches at positions {pending} are still proposed; "
                    "confirm, correct, or reject them first"
                )
            matches = list(session.state.matches)
            tps_a, tps_b = session.tps_a, session.tps_b
            active = [m for m in matches if m.status is not MatchStatus.REJECTED]
            if len(active) < 2:
                raise ValidationError(
                    f"need at least 2 surviving matches to finalize, got {len(active)}"
                )
            try:
                transform = fit_transform_from_matches(
                    matches, tps_a, tps_b, session.params.model
                )
            except DegenerateGeometryError as exc:
                minimum = "3 non-collinear" if session.params.model.value == "affine" else "2 distinct"
                raise DegenerateGeometryError(
                    f"cannot fit {session.params.model.value} transform: {exc}; "
                    f"need >= {minimum} confirmed matches"
                ) from None
            align_trajectory(session.traj_a, transform)
            pairs = generate_frame_pairs(
                matches, tps_a, tps_b, session.duration_a, session.duration_b
            )
            artifacts_dir = self._session_dir(session.session_id) / "artifacts"
            artifacts_dir.mkdir(exist_ok=True)
            manifest_path = artifacts_dir / "frame_pairs.csv"
            write_frame_pairs_csv(pairs, manifest_path)
            transform_path = artifacts_dir / "transform.json"
            _atomic_write(
                transform_path,
                json.dumps(
                    {
                        "matrix": transform.matrix.tolist(),
                        "model": transform.model.value,
                        "rms_residual": transform.rms_residual,
                        "point_count": transform.point_count,
                    },
                    indent=2,
                )
                + "\n",
            )
            matches_path = artifacts_dir / "matches.txt"
            _atomic_write(matches_path, format_matches(matches, tps_a, tps_b))
            for name, tps in (("turning_points_a.txt", tps_a), ("turning_points_b.txt", tps_b)):
                _atomic_write(artifacts_dir / name, format_turning_points(tps))
            session.artifact_paths = [
                str(manifest_path),
                str(transform_path),
                str(matches_path),
                str(artifacts_dir / "turning_points_a.txt"),
                str(artifacts_dir / "turning_points_b.txt"),
            ]
            session.status = SessionStatus.FINALIZED
            self._persist_meta(session)
            return session.artifact_paths

    def reopen_session(self, session_id: str) -> AnnotationSession:
        session = self.get_session(session_id)
        with self._locks[session_id]:
            if session.status is not SessionStatus.FINALIZED:
                raise StateError("only finalized sessions can be reopened")
            session.status = SessionStatus.IN_REVIEW
            self._persist_meta(session)
            return session

    def replay(self, session_id: str) -> SessionState:
        """Rebuild the session state from the proposal and the audit log."""
        session_dir = self._session_dir(session_id)
        proposal = json.loads((session_dir / "proposal.json").read_text(encoding="utf-8"))
        meta = json.loads((session_dir / "session.json").read_text(encoding="utf-8"))
        traj_a = parse_trajectory(meta["traj_a_path"], scene_id=meta["scene_id"], visit_id="a")
        traj_b = parse_trajectory(meta["traj_b_path"], scene_id=meta["scene_id"], visit_id="b")
        state = SessionState(
            points_a=tuple(_point_from_dict(d) for d in proposal["points_a"]),
            points_b=tuple(_point_from_dict(d) for d in proposal["points_b"]),
            matches=tuple(_match_from_dict(d) for d in proposal["matches"]),
        )
        for entry in self._read_log(session_dir):
            state = apply_wire_correction(state, entry["correction"], traj_a, traj_b)
        return state

    # -- media -------------------------------------------------------------

    def _candidate(self, session: AnnotationSession, side: str, keyframe: int) -> Candidate:
        traj = session.traj_a if side == "a" else session.traj_b
        visit = traj.visit_id or side
        url = None
        if self.media_root is not None:
            rel = f"{session.scene_id}/{visit}/kf_{keyframe:06d}.jpg"
            url = f"/media/{rel}"
        x, y = traj.positions[keyframe].tolist()
        return Candidate(
            keyframe_index=keyframe,
            timestamp=float(traj.timestamps[keyframe]),
            position=(x, y),
            image_url=url,
        )

    # -- persistence -------------------------------------------------------

    def _session_dir(self, session_id: str) -> Path:
        path = self.data_dir / session_id
        if not (path / "session.json").exists():
            raise NotFoundError(f"no session {session_id!r}")
        return path

    def _persist_new(self, session: AnnotationSession) -> None:
        session_dir = self.data_dir / session.session_id
        session_dir.mkdir(parents=True)
        proposal = {
            "points_a": [_point_to_dict(p) for p in session.state.points_a],
            "points_b": [_point_to_dict(p) for p in session.state.points_b],
            "matches": [_match_to_dict(m) for m in session.state.matches],
        }
        _atomic_write(session_dir / "proposal.json", json.dumps(proposal, indent=2) + "\n")
        (session_dir / "corrections.log").touch()
        self._persist_meta(session)

    def _persist_meta(self, session: AnnotationSession) -> None:
        meta = {
            "session_id": session.session_id,
            "scene_id": session.scene_id,
            "traj_a_path": session.traj_a_path,
            "traj_b_path": session.traj_b_path,
            "duration_a": session.duration_a,
            "duration_b": session.duration_b,
            "params": {
                "epsilon": session.params.epsilon,
                "angle_threshold_deg": session.params.angle_threshold_deg,
                "model": session.params.model.value,
                "angle_weight": session.params.angle_weight,
                "gap_penalty": session.params.gap_penalty,
                "window_radius": session.params.window_radius,
            },
            "status": session.status.value,
            "version": session.version,
            "artifacts": session.artifact_paths,
        }
        _atomic_write(
            self.data_dir / session.session_id / "session.json",
            json.dumps(meta, indent=2) + "\n",
        )

    def _append_log(self, session: AnnotationSession, entry: dict) -> None:
        log_path = self.data_dir / session.session_id / "corrections.log"
        with open(log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    @staticmethod
    def _read_log(session_dir: Path) -> list[dict]:
        entries = []
        text = (session_dir / "corrections.log").read_text(encoding="utf-8")
        lines = text.splitlines()
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                entries.append(json.loads(line))
            except json.JSONDecodeError:
                if i == len(lines) - 1 and not text.endswith("\n"):
                    break  # torn trailing write from a crash; state before it is intact
                raise
        return entries

    def _load(self, session_id: str) -> AnnotationSession:
        session_dir = self._session_dir(session_id)
        meta = json.loads((session_dir / "session.json").read_text(encoding="utf-8"))
        params_dict = meta["params"]
        params = PipelineConfig(
            epsilon=params_dict["epsilon"],
            angle_threshold_deg=params_dict["angle_threshold_deg"],
            model=params_dict["model"],
            angle_weight=params_dict["angle_weight"],
            gap_penalty=params_dict["gap_penalty"],
            window_radius=params_dict["window_radius"],
        )
        traj_a = parse_trajectory(meta["traj_a_path"], scene_id=meta["scene_id"], visit_id="a")
        traj_b = parse_trajectory(meta["traj_b_path"], scene_id=meta["scene_id"], visit_id="b")
        state = self.replay(session_id)
        log_entries = self._read_log(session_dir)
        return AnnotationSession(
            session_id=session_id,
            scene_id=meta["scene_id"],
            traj_a_path=meta["traj_a_path"],
            traj_b_path=meta["traj_b_path"],
            duration_a=meta["duration_a"],
            duration_b=meta["duration_b"],
            params=params,
            traj_a=traj_a,
            traj_b=traj_b,
            state=state,
            status=SessionStatus(meta["status"]),
            version=1 + len(log_entries),
            audit=log_entries,
            artifact_paths=list(meta.get("artifacts", [])),
        )

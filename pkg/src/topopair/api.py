"""HTTP+JSON API over the annotation store.

All routes operate on the AnnotationStore; the app holds no state of its
own, so anything scriptable over HTTP is equally scriptable through the
store directly. Errors map to a JSON body {code, message, detail}.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .config import PipelineConfig
from .errors import (
    DegenerateGeometryError,
    NotFoundError,
    ParseError,
    StateError,
    TopopairError,
    ValidationError,
    VersionConflictError,
)
from .service import AnnotationSession, AnnotationStore

_ERROR_STATUS = [
    (NotFoundError, 404, "not_found"),
    (VersionConflictError, 409, "version_conflict"),
    (StateError, 409, "state_error"),
    (DegenerateGeometryError, 422, "degenerate_geometry"),
    (ParseError, 400, "parse_error"),
    (ValidationError, 400, "validation_error"),
    (TopopairError, 400, "error"),
]


class SessionParams(BaseModel):
    epsilon: float | None = None
    angle_threshold_deg: float = 30.0
    model: str = "affine"
    angle_weight: float = 0.25
    gap_penalty: float = 0.15
    window_radius: int = 10

    def to_config(self) -> PipelineConfig:
        return PipelineConfig(
            epsilon=self.epsilon,
            angle_threshold_deg=self.angle_threshold_deg,
            model=self.model,
            angle_weight=self.angle_weight,
            gap_penalty=self.gap_penalty,
            window_radius=self.window_radius,
        )


class CreateSessionRequest(BaseModel):
    scene_id: str
    traj_a: str
    traj_b: str
    duration_a: float
    duration_b: float
    visit_a: str = "a"
    visit_b: str = "b"
    params: SessionParams = Field(default_factory=SessionParams)


class CorrectionRequest(BaseModel):
    version: int
    action: str
    position: int | None = None
    keyframe_a: int | None = None
    keyframe_b: int | None = None
    annotator: str = "anonymous"

    def to_wire(self) -> dict:
        wire: dict = {"action": self.action}
        for key in ("position", "keyframe_a", "keyframe_b"):
            value = getattr(self, key)
            if value is not None:
                wire[key] = value
        return wire


def _matches_view(session: AnnotationSession) -> list[dict]:
    view = []
    for position, m in enumerate(session.state.matches):
        ka = session.state.points_a[m.index_a].keyframe_index
        kb = session.state.points_b[m.index_b].keyframe_index
        view.append(
            {
                "position": position,
                "index_a": m.index_a,
                "index_b": m.index_b,
                "keyframe_a": ka,
                "keyframe_b": kb,
                "timestamp_a": float(session.traj_a.timestamps[ka]),
                "timestamp_b": float(session.traj_b.timestamps[kb]),
                "status": m.status.value,
            }
        )
    return view


def _session_view(session: AnnotationSession) -> dict:
    def traj_view(traj):
        return {
            "visit_id": traj.visit_id,
            "timestamps": traj.timestamps.tolist(),
            "positions": traj.positions.tolist(),
        }

    def points_view(points):
        return [
            {
                "position": i,
                "keyframe_index": p.keyframe_index,
                "angle_deg": p.angle_deg,
                "origin": p.origin.value,
            }
            for i, p in enumerate(points)
        ]

    return {
        "session_id": session.session_id,
        "scene_id": session.scene_id,
        "status": session.status.value,
        "version": session.version,
        "duration_a": session.duration_a,
        "duration_b": session.duration_b,
        "trajectory_a": traj_view(session.traj_a),
        "trajectory_b": traj_view(session.traj_b),
        "turning_points_a": points_view(session.state.points_a),
        "turning_points_b": points_view(session.state.points_b),
        "matches": _matches_view(session),
        "artifacts": session.artifact_paths,
    }


def create_app(
    data_dir: str | Path,
    media_root: str | Path | None = None,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    """Build the annotation service app over a session store."""
    store = AnnotationStore(data_dir, media_root=media_root)
    app = FastAPI(title="topopair annotation service")
    app.state.store = store

    @app.exception_handler(TopopairError)
    async def topopair_error_handler(request: Request, exc: TopopairError):
        for err_type, status, code in _ERROR_STATUS:
            if isinstance(exc, err_type):
                return JSONResponse(
                    status_code=status,
                    content={
                        "code": code,
                        "message": str(exc),
                        "detail": {"type": type(exc).__name__},
                    },
                )
        raise exc

    @app.get("/sessions")
    def list_sessions():
        return {"sessions": store.list_sessions()}

    @app.post("/sessions", status_code=201)
    def create_session(request: CreateSessionRequest):
        session = store.create_session(
            scene_id=request.scene_id,
            traj_a_path=request.traj_a,
            traj_b_path=request.traj_b,
            duration_a=request.duration_a,
            duration_b=request.duration_b,
            params=request.params.to_config(),
            visit_a=request.visit_a,
            visit_b=request.visit_b,
        )
        return _session_view(session)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return _session_view(store.get_session(session_id))

    @app.get("/sessions/{session_id}/matches")
    def get_matches(session_id: str):
        session = store.get_session(session_id)
        return {"version": session.version, "matches": _matches_view(session)}

    @app.get("/sessions/{session_id}/matches/{position}/candidates")
    def get_candidates(session_id: str, position: int, radius: int | None = None):
        window = store.get_candidates(session_id, position, radius)
        def candidate_view(c):
            return {
                "keyframe_index": c.keyframe_index,
                "timestamp": c.timestamp,
                "position": list(c.position),
                "image_url": c.image_url,
            }
        return {
            "match_position": window.match_position,
            "target_keyframe_a": candidate_view(window.target_keyframe_a),
            "proposed_keyframe_b": window.proposed_keyframe_b,
            "candidates": [candidate_view(c) for c in window.candidates],
        }

    @app.post("/sessions/{session_id}/corrections")
    def submit_correction(session_id: str, request: CorrectionRequest):
        session = store.submit_correction(
            session_id,
            request.to_wire(),
            expected_version=request.version,
            annotator=request.annotator,
        )
        return {"version": session.version, "matches": _matches_view(session)}

    @app.post("/sessions/{session_id}/finalize")
    def finalize(session_id: str):
        artifacts = store.finalize_session(session_id)
        return {"artifacts": artifacts}

    @app.post("/sessions/{session_id}/reopen")
    def reopen(session_id: str):
        session = store.reopen_session(session_id)
        return _session_view(session)

    @app.get("/sessions/{session_id}/artifacts")
    def artifacts(session_id: str):
        session = store.get_session(session_id)
        return {
            "artifacts": [
                {"name": Path(p).name, "path": p} for p in session.artifact_paths
            ]
        }

    @app.get("/sessions/{session_id}/artifacts/{name}")
    def artifact_file(session_id: str, name: str):
        session = store.get_session(session_id)
        for p in session.artifact_paths:
            if Path(p).name == name:
                return FileResponse(p)
        raise NotFoundError(f"no artifact {name!r} in session {session_id}")

    if media_root is not None:
        app.mount("/media", StaticFiles(directory=media_root), name="media")
    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    return app

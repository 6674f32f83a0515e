"""End-to-end orchestration: manifest in, ground-truth artifacts out.

Each pairing in a scene manifest runs detect -> propose -> fit -> generate.
In auto-only mode the proposals are accepted as-is; otherwise an
annotation session is created for human review through the service and
UI. Failures are isolated per pair: the run continues and the summary
records what failed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

from .config import PipelineConfig
from .errors import TopopairError
from .evaluation import evaluate_scenes, read_locations_csv, read_results
from .groundtruth import FramePair, generate_frame_pairs, write_frame_pairs_csv
from .matching import (
    AlignmentTransform,
    MatchStatus,
    TurningPointMatch,
    fit_transform_from_matches,
    format_matches,
    propose_matches,
)
from .service import AnnotationStore
from .trajectory import SceneManifest, Trajectory, load_scene_manifest
from .turning import TurningPointSet, detect_turning_points, format_turning_points


def confirm_all(matches: list[TurningPointMatch]) -> list[TurningPointMatch]:
    """Accept every proposal (the auto-only stand-in for a review pass)."""
    return [
        replace(m, status=MatchStatus.CONFIRMED) if m.status is MatchStatus.PROPOSED else m
        for m in matches
    ]


@dataclass(frozen=True)
class PairResult:
    """Everything one trajectory pair produces on the auto path."""

    visit_a: str
    visit_b: str
    tps_a: TurningPointSet
    tps_b: TurningPointSet
    matches: list[TurningPointMatch]
    transform: AlignmentTransform
    frame_pairs: list[FramePair]


def run_pair(
    traj_a: Trajectory,
    traj_b: Trajectory,
    duration_a: float,
    duration_b: float,
    config: PipelineConfig | None = None,
) -> PairResult:
    """Run the automatic pipeline on one trajectory pair."""
    config = config or PipelineConfig()
    tps_a = detect_turning_points(traj_a, config.epsilon, config.angle_threshold_deg)
    tps_b = detect_turning_points(traj_b, config.epsilon, config.angle_threshold_deg)
    matches = confirm_all(
        propose_matches(
            tps_a, tps_b, angle_weight=config.angle_weight, gap_penalty=config.gap_penalty
        )
    )
    transform = fit_transform_from_matches(matches, tps_a, tps_b, config.model)
    frame_pairs = generate_frame_pairs(matches, tps_a, tps_b, duration_a, duration_b)
    return PairResult(
        visit_a=traj_a.visit_id,
        visit_b=traj_b.visit_id,
        tps_a=tps_a,
        tps_b=tps_b,
        matches=matches,
        transform=transform,
        frame_pairs=frame_pairs,
    )


def write_pair_artifacts(result: PairResult, pair_dir: Path) -> None:
    pair_dir.mkdir(parents=True, exist_ok=True)
    write_frame_pairs_csv(result.frame_pairs, pair_dir / "frame_pairs.csv")
    (pair_dir / "transform.json").write_text(
        json.dumps(
            {
                "matrix": result.transform.matrix.tolist(),
                "model": result.transform.model.value,
                "rms_residual": result.transform.rms_residual,
                "point_count": result.transform.point_count,
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    (pair_dir / "matches.txt").write_text(
        format_matches(result.matches, result.tps_a, result.tps_b), encoding="utf-8"
    )
    (pair_dir / "turning_points_a.txt").write_text(
        format_turning_points(result.tps_a), encoding="utf-8"
    )
    (pair_dir / "turning_points_b.txt").write_text(
        format_turning_points(result.tps_b), encoding="utf-8"
    )


@dataclass
class RunSummary:
    run_dir: Path
    pairs: list[dict]

    @property
    def failed(self) -> list[dict]:
        return [p for p in self.pairs if p["status"] == "failed"]

    @property
    def ok(self) -> bool:
        return not self.failed

    def to_text(self) -> str:
        lines = []
        for p in self.pairs:
            if p["status"] == "ok":
                lines.append(
                    f"{p['pair']}: ok  matches={p['match_count']} "
                    f"frame_pairs={p['frame_pair_count']} rms_residual={p['rms_residual']:.3e}"
                )
            elif p["status"] == "session":
                lines.append(f"{p['pair']}: session {p['session_id']} awaiting review")
            else:
                lines.append(f"{p['pair']}: FAILED  {p['error']}")
        lines.append(f"{len(self.pairs) - len(self.failed)}/{len(self.pairs)} pairs succeeded")
        return "\n".join(lines) + "\n"


def run_manifest(
    manifest: SceneManifest | str | Path,
    config: PipelineConfig | None = None,
    auto_only: bool = True,
    run_dir: str | Path | None = None,
) -> RunSummary:
    """Process every pairing in a scene manifest.

    Artifacts land under a timestamped run directory (or ``run_dir`` when
    given) with the resolved config echoed into it. Per-pair failures are
    isolated; the summary lists them and ``RunSummary.ok`` reflects the
    whole run.
    """
    config = config or PipelineConfig()
    if not isinstance(manifest, SceneManifest):
        manifest = load_scene_manifest(manifest)
    if run_dir is None:
        stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
        run_dir = Path(config.output_dir) / f"run-{manifest.scene_id}-{stamp}"
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.txt").write_text(config.to_text(), encoding="utf-8")

    store = None if auto_only else AnnotationStore(run_dir / "sessions")
    pairs: list[dict] = []
    for visit_a, visit_b in manifest.pairings:
        label = f"{visit_a}__{visit_b}"
        entry_a = manifest.visit(visit_a)
        entry_b = manifest.visit(visit_b)
        try:
            if auto_only:
                traj_a = manifest.load_trajectory(visit_a)
                traj_b = manifest.load_trajectory(visit_b)
                result = run_pair(traj_a, traj_b, entry_a.duration, entry_b.duration, config)
                write_pair_artifacts(result, run_dir / "pairs" / label)
                pairs.append(
                    {
                        "pair": label,
                        "status": "ok",
                        "match_count": len(result.matches),
                        "frame_pair_count": len(result.frame_pairs),
                        "rms_residual": result.transform.rms_residual,
                    }
                )
            else:
                traj_path_a = Path(entry_a.trajectory_path)
                traj_path_b = Path(entry_b.trajectory_path)
                if not traj_path_a.is_absolute():
                    traj_path_a = manifest.base_dir / traj_path_a
                if not traj_path_b.is_absolute():
                    traj_path_b = manifest.base_dir / traj_path_b
                session = store.create_session(
                    scene_id=manifest.scene_id,
                    traj_a_path=traj_path_a,
                    traj_b_path=traj_path_b,
                    duration_a=entry_a.duration,
                    duration_b=entry_b.duration,
                    params=config,
                    visit_a=visit_a,
                    visit_b=visit_b,
                )
                pairs.append(
                    {"pair": label, "status": "session", "session_id": session.session_id}
                )
        except TopopairError as exc:
            pairs.append({"pair": label, "status": "failed", "error": str(exc)})

    summary = RunSummary(run_dir=run_dir, pairs=pairs)
    (run_dir / "summary.json").write_text(
        json.dumps({"scene_id": manifest.scene_id, "pairs": pairs}, indent=2) + "\n",
        encoding="utf-8",
    )
    (run_dir / "summary.txt").write_text(summary.to_text(), encoding="utf-8")
    return summary


def run_evaluation(
    locations_path: str | Path,
    results_path: str | Path,
    config: PipelineConfig | None = None,
    out_dir: str | Path | None = None,
    units_per_meter: dict[str, float] | None = None,
):
    """Score a retrieval results file; optionally write the report files.

    Returns the EvaluationReport; with ``out_dir`` set, report.txt and
    report.json are written there as well.
    """
    config = config or PipelineConfig()
    images = read_locations_csv(locations_path)
    results = read_results(results_path)
    scales = dict(units_per_meter or {})
    report = evaluate_scenes(
        images,
        results,
        n_values=config.n_values,
        threshold=config.threshold,
        units_per_meter={
            img.scene_id: scales.get(img.scene_id, config.units_per_meter) for img in images
        },
    )
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.txt").write_text(report.to_text(), encoding="utf-8")
        (out_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
    return report

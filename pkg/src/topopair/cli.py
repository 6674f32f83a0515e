"""Command-line entry point exposing the pipeline end to end and per stage."""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path

import click

from . import __version__
from .config import PipelineConfig, load_config
from .errors import TopopairError
from .groundtruth import write_frame_pairs_csv
from .matching import format_matches, propose_matches
from .pipeline import run_evaluation, run_manifest, run_pair
from .synthetic import (
    SpeedProfile,
    SyntheticRoute,
    generate_route,
    traverse,
    write_synthetic_pair,
)
from .trajectory import parse_trajectory, serialize_trajectory
from .turning import detect_turning_points, format_turning_points


def _fail(exc: TopopairError) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


def _build_config(config_path: str | None, **overrides) -> PipelineConfig:
    config = PipelineConfig()
    if config_path:
        config = load_config(config_path, config)
    cleaned = {k: v for k, v in overrides.items() if v is not None}
    if cleaned:
        config = replace(config, **cleaned)
    return config


@click.group()
@click.version_option(version=__version__, message="%(version)s")
def main():
    """Topometric ground-truth tooling for indoor place recognition."""


@main.command()
@click.option("--traj", required=True, type=click.Path(exists=True), help="Trajectory file.")
@click.option("--format", "fmt", type=click.Choice(["tum", "csv"]), default=None)
@click.option("--epsilon", type=float, default=None, help="RDP tolerance (default: 1% of length).")
@click.option("--angle", type=float, default=30.0, help="Turn angle threshold in degrees.")
@click.option("--out", required=True, type=click.Path(), help="Output turning-point list.")
def detect(traj, fmt, epsilon, angle, out):
    """Detect turning points of one trajectory."""
    try:
        trajectory = parse_trajectory(traj, format=fmt)
        tps = detect_turning_points(trajectory, epsilon, angle)
    except TopopairError as exc:
        _fail(exc)
    Path(out).write_text(format_turning_points(tps), encoding="utf-8")
    interior = sum(1 for p in tps.points if p.angle_deg is not None)
    click.echo(f"{interior} turning points (+2 endpoints) -> {out}")


@main.command()
@click.option("--traj-a", required=True, type=click.Path(exists=True))
@click.option("--traj-b", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--epsilon", type=float, default=None)
@click.option("--angle", type=float, default=None)
@click.option("--out", required=True, type=click.Path())
def propose(traj_a, traj_b, config_path, epsilon, angle, out):
    """Propose turning-point matches for a trajectory pair."""
    config = _build_config(config_path, epsilon=epsilon, angle_threshold_deg=angle)
    try:
        a = parse_trajectory(traj_a)
        b = parse_trajectory(traj_b)
        tps_a = detect_turning_points(a, config.epsilon, config.angle_threshold_deg)
        tps_b = detect_turning_points(b, config.epsilon, config.angle_threshold_deg)
        matches = propose_matches(
            tps_a, tps_b, angle_weight=config.angle_weight, gap_penalty=config.gap_penalty
        )
    except TopopairError as exc:
        _fail(exc)
    Path(out).write_text(format_matches(matches, tps_a, tps_b), encoding="utf-8")
    click.echo(f"{len(matches)} proposed matches -> {out}")


@main.command()
@click.option("--traj-a", required=True, type=click.Path(exists=True))
@click.option("--traj-b", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--model", type=click.Choice(["affine", "similarity"]), default=None)
@click.option("--out", required=True, type=click.Path(), help="Transform JSON output.")
@click.option("--aligned-out", type=click.Path(), default=None, help="Aligned trajectory A output.")
def align(traj_a, traj_b, config_path, model, out, aligned_out):
    """Fit the least-squares transform from auto-matched turning points."""
    from .matching import align_trajectory, fit_transform_from_matches
    from .pipeline import confirm_all

    config = _build_config(config_path, model=model)
    try:
        a = parse_trajectory(traj_a)
        b = parse_trajectory(traj_b)
        tps_a = detect_turning_points(a, config.epsilon, config.angle_threshold_deg)
        tps_b = detect_turning_points(b, config.epsilon, config.angle_threshold_deg)
        matches = confirm_all(
            propose_matches(
                tps_a, tps_b, angle_weight=config.angle_weight, gap_penalty=config.gap_penalty
            )
        )
        transform = fit_transform_from_matches(matches, tps_a, tps_b, config.model)
    except TopopairError as exc:
        _fail(exc)
    Path(out).write_text(
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
        encoding="utf-8",
    )
    if aligned_out:
        serialize_trajectory(align_trajectory(a, transform), aligned_out)
    click.echo(f"rms_residual={transform.rms_residual:.6e} -> {out}")


@main.command()
@click.option("--traj-a", required=True, type=click.Path(exists=True))
@click.option("--traj-b", required=True, type=click.Path(exists=True))
@click.option("--duration-a", required=True, type=float)
@click.option("--duration-b", required=True, type=float)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", required=True, type=click.Path(), help="Frame pair CSV output.")
def generate(traj_a, traj_b, duration_a, duration_b, config_path, out):
    """Run the auto pipeline on one pair and write the frame-pair manifest."""
    config = _build_config(config_path)
    try:
        a = parse_trajectory(traj_a)
        b = parse_trajectory(traj_b)
        result = run_pair(a, b, duration_a, duration_b, config)
    except TopopairError as exc:
        _fail(exc)
    write_frame_pairs_csv(result.frame_pairs, out)
    click.echo(f"{len(result.frame_pairs)} frame pairs -> {out}")


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--auto-only", is_flag=True, help="Accept all proposals without review sessions.")
@click.option("--out", type=click.Path(), default=None, help="Base output directory.")
@click.option("--run-dir", type=click.Path(), default=None, help="Exact run directory (no timestamp).")
def pipeline(manifest, config_path, auto_only, out, run_dir):
    """Process every pairing in a scene manifest."""
    config = _build_config(config_path, output_dir=out)
    try:
        summary = run_manifest(manifest, config, auto_only=auto_only, run_dir=run_dir)
    except TopopairError as exc:
        _fail(exc)
    click.echo(summary.to_text(), nl=False)
    click.echo(f"artifacts under {summary.run_dir}")
    if not summary.ok:
        sys.exit(1)


@main.command()
@click.option("--locations", required=True, type=click.Path(exists=True))
@click.option("--results", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--threshold", type=float, default=None)
@click.option("--n", "n_values", default=None, help="Comma-separated N list, e.g. 1,5,10,20.")
@click.option(
    "--scale",
    "scales",
    multiple=True,
    help="Per-scene units per meter as scene=factor; repeatable.",
)
@click.option("--out", type=click.Path(), default=None, help="Directory for report files.")
def evaluate(locations, results, config_path, threshold, n_values, scales, out):
    """Evaluate retrieval results with recall@N against ground-truth locations."""
    parsed_n = tuple(int(v) for v in n_values.split(",")) if n_values else None
    config = _build_config(config_path, threshold=threshold, n_values=parsed_n)
    per_scene = {}
    for item in scales:
        scene, _, factor = item.partition("=")
        try:
            per_scene[scene] = float(factor)
        except ValueError:
            click.echo(f"error: bad --scale {item!r}, expected scene=factor", err=True)
            sys.exit(1)
    try:
        report = run_evaluation(locations, results, config, out_dir=out, units_per_meter=per_scene)
    except TopopairError as exc:
        _fail(exc)
    click.echo(report.to_text(), nl=False)


@main.group()
def synth():
    """Generate synthetic routes and trajectory pairs with known truth."""


def _load_route(path: str) -> SyntheticRoute:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    import numpy as np

    return SyntheticRoute(
        corners=np.asarray(doc["corners"], dtype=float),
        turn_angles_deg=np.asarray(doc["turn_angles_deg"], dtype=float),
    )


@synth.command()
@click.option("--corners", type=int, default=6)
@click.option("--min-turn", type=float, default=45.0)
@click.option("--seed", type=int, default=0)
@click.option("--out", required=True, type=click.Path(), help="Route JSON output.")
def route(corners, min_turn, seed, out):
    """Generate a random route polyline."""
    try:
        generated = generate_route(num_corners=corners, min_turn_deg=min_turn, seed=seed)
    except TopopairError as exc:
        _fail(exc)
    Path(out).write_text(
        json.dumps(
            {
                "corners": generated.corners.tolist(),
                "turn_angles_deg": generated.turn_angles_deg.tolist(),
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    click.echo(f"route with {corners} corners, length {generated.total_length:.1f} -> {out}")


@synth.command("traverse")
@click.option("--route", "route_path", required=True, type=click.Path(exists=True))
@click.option("--duration", type=float, default=60.0)
@click.option("--rate", type=float, default=2.0, help="Keyframes per second.")
@click.option("--profile", type=click.Choice([p.value for p in SpeedProfile]), default="constant")
@click.option("--noise", type=float, default=0.0, help="Positional noise sigma.")
@click.option("--seed", type=int, default=0)
@click.option("--corner-keyframes", is_flag=True, help="Insert keyframes at corner passages.")
@click.option("--out", required=True, type=click.Path(), help="Trajectory output (.csv or TUM).")
def synth_traverse(route_path, duration, rate, profile, noise, seed, corner_keyframes, out):
    """Traverse a route once and write the trajectory."""
    try:
        loaded = _load_route(route_path)
        trav = traverse(
            loaded,
            duration=duration,
            keyframe_rate=rate,
            speed_profile=profile,
            noise_sigma=noise,
            seed=seed,
            include_corner_keyframes=corner_keyframes,
        )
    except TopopairError as exc:
        _fail(exc)
    serialize_trajectory(trav.trajectory, out)
    click.echo(f"{len(trav.trajectory)} keyframes -> {out}")


@synth.command()
@click.option("--corners", type=int, default=6)
@click.option("--min-turn", type=float, default=45.0)
@click.option("--duration-a", type=float, default=60.0)
@click.option("--duration-b", type=float, default=90.0)
@click.option("--rate", type=float, default=2.0)
@click.option("--profile-b", type=click.Choice([p.value for p in SpeedProfile]), default="constant")
@click.option("--noise", type=float, default=0.0)
@click.option("--seed", type=int, default=0)
@click.option("--corner-keyframes", is_flag=True)
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
def pair(corners, min_turn, duration_a, duration_b, rate, profile_b, noise, seed, corner_keyframes, out):
    """Generate a matched traversal pair plus manifest and truth files."""
    try:
        generated = generate_route(num_corners=corners, min_turn_deg=min_turn, seed=seed)
        trav_a = traverse(
            generated,
            duration=duration_a,
            keyframe_rate=rate,
            noise_sigma=noise,
            seed=seed + 1,
            visit_id="a",
            include_corner_keyframes=corner_keyframes,
        )
        trav_b = traverse(
            generated,
            duration=duration_b,
            keyframe_rate=rate,
            speed_profile=profile_b,
            noise_sigma=noise,
            seed=seed + 2,
            visit_id="b",
            include_corner_keyframes=corner_keyframes,
        )
        manifest_path = write_synthetic_pair(
            out, generated, trav_a, trav_b, duration_a, duration_b
        )
    except TopopairError as exc:
        _fail(exc)
    click.echo(f"pair manifest -> {manifest_path}")


@main.command()
@click.option("--data-dir", required=True, type=click.Path(), help="Session storage directory.")
@click.option("--media-root", type=click.Path(exists=True), default=None)
@click.option("--ui-dir", type=click.Path(exists=True), default=None, help="Static UI assets.")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(data_dir, media_root, ui_dir, host, port):
    """Run the annotation service."""
    import uvicorn

    from .api import create_app

    app = create_app(data_dir, media_root=media_root, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()

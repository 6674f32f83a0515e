"""Acceptance suite: one test per criterion, one pass/fail line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the criterion
lines as they complete.
"""

from __future__ import annotations

import math
import time
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from test_matching import normal_equation_oracle, oracle_rms
from test_turning import reference_rdp

from topopair.cli import main as cli_main
from topopair.config import PipelineConfig
from topopair.evaluation import (
    ImageRole,
    LocalizedImage,
    RetrievalResult,
    recall_at_n,
    weighted_average,
)
from topopair.groundtruth import frame_count
from topopair.matching import fit_transform
from topopair.pipeline import run_pair
from topopair.service import AnnotationStore
from topopair.synthetic import generate_route, traverse, true_matching, write_synthetic_pair
from topopair.turning import rdp_simplify


class _Criterion:
    """Times a criterion and prints its pass/fail line."""

    def __init__(self, name: str, limit_seconds: float):
        self.name = name
        self.limit = limit_seconds

    def __enter__(self):
        self.start = time.time()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.time() - self.start
        status = "PASS" if exc_type is None and elapsed < self.limit else "FAIL"
        print(f"[{status}] {self.name} ({elapsed:.2f}s, limit {self.limit:.0f}s)")
        if exc_type is None:
            assert elapsed < self.limit, f"{self.name} exceeded {self.limit}s"
        return False


def test_formula_fidelity():
    with _Criterion("formula fidelity: n = 2 * min(T1, T2)", 1.0):
        assert frame_count(10, 8) == 16
        for t1 in range(1, 61):
            for t2 in range(1, 61):
                assert frame_count(t1, t2) == math.floor(2 * min(t1, t2)) == 2 * min(t1, t2)


def test_least_squares_oracle():
    with _Criterion("least-squares fit matches normal-equation oracle", 10.0):
        rng = np.random.default_rng(2024)
        sigmas = [0.0, 0.01, 0.1]
        for i in range(200):
            n = int(rng.integers(3, 51))
            sigma = sigmas[i % 3]
            true = np.eye(3)
            true[:2, :2] = rng.uniform(-1.5, 1.5, size=(2, 2))
            true[:2, 2] = rng.uniform(-5, 5, size=2)
            while True:
                src = rng.uniform(0, 5, size=(n, 2))
                centered = src - src.mean(axis=0)
                s = np.linalg.svd(centered, compute_uv=False)
                if s[-1] > 0.1:  # keep instances well away from collinearity
                    break
            dst = src @ true[:2, :2].T + true[:2, 2] + rng.normal(0, sigma, size=(n, 2))
            fitted = fit_transform(src, dst, "affine")
            oracle = normal_equation_oracle(src, dst)
            assert np.max(np.abs(fitted.matrix - oracle.astype(float))) < 1e-6
            assert abs(fitted.rms_residual - oracle_rms(oracle, src, dst)) < 1e-9


def test_rdp_oracle():
    with _Criterion("RDP equals recursive reference and respects epsilon", 10.0):
        rng = np.random.default_rng(7)
        for _ in range(500):
            n = int(rng.integers(2, 201))
            pts = np.cumsum(rng.normal(size=(n, 2)), axis=0) * rng.uniform(0.2, 3.0)
            eps = float(rng.uniform(0.05, 2.0))
            kept = rdp_simplify(pts, eps)
            assert kept.tolist() == reference_rdp(pts, eps)
            # direct measurement of the deviation guarantee
            for a, b in zip(kept, kept[1:]):
                seg = pts[b] - pts[a]
                denom = float(seg @ seg)
                for i in range(a + 1, b):
                    if denom == 0.0:
                        d = float(np.linalg.norm(pts[i] - pts[a]))
                    else:
                        t = min(1.0, max(0.0, float((pts[i] - pts[a]) @ seg) / denom))
                        d = float(np.linalg.norm(pts[i] - (pts[a] + t * seg)))
                    assert d <= eps + 1e-12


def test_end_to_end_synthetic_recovery():
    with _Criterion("end-to-end synthetic recovery (noise-free and noisy)", 30.0):
        route = generate_route(num_corners=6, min_turn_deg=50, seed=42)

        # noise-free: exact recovery
        trav_a = traverse(
            route, duration=60, keyframe_rate=2, seed=1, visit_id="a",
            include_corner_keyframes=True,
        )
        trav_b = traverse(
            route, duration=90, keyframe_rate=2, seed=2, visit_id="b",
            include_corner_keyframes=True,
        )
        result = run_pair(trav_a.trajectory, trav_b.trajectory, 60.0, 90.0)
        truth = true_matching(trav_a, trav_b, route)
        for tps, true_corners in (
            (result.tps_a, truth.corner_keyframes_a),
            (result.tps_b, truth.corner_keyframes_b),
        ):
            detected = [p.keyframe_index for p in tps.points]
            for true_idx in true_corners:
                assert min(abs(d - int(true_idx)) for d in detected) <= 2
        assert result.transform.rms_residual < 1e-6
        locations = np.array([p.location for p in result.frame_pairs])
        assert float(route.distance_to(locations).max()) < 1e-6

        # noisy: median mean-location-error over 20 seeds below the frozen 2-sigma bound
        sigma = 0.005 * route.total_length
        errors = []
        for seed in range(20):
            noisy_a = traverse(
                route, duration=60, keyframe_rate=2, noise_sigma=sigma, seed=100 + seed,
                visit_id="a", include_corner_keyframes=True,
            )
            noisy_b = traverse(
                route, duration=90, keyframe_rate=2, noise_sigma=sigma, seed=200 + seed,
                visit_id="b", include_corner_keyframes=True,
            )
            noisy = run_pair(noisy_a.trajectory, noisy_b.trajectory, 60.0, 90.0)
            locs = np.array([p.location for p in noisy.frame_pairs])
            errors.append(float(np.mean(route.distance_to(locs))))
        assert float(np.median(errors)) < 2 * sigma


def test_recall_oracle():
    with _Criterion("recall@N equals brute-force double loop", 5.0):

        def brute_force(queries, database, results, n, threshold):
            db = {img.image_id: img for img in database}
            by_query = {r.query_id: r for r in results}
            hits = 0
            for q in queries:
                for db_id in by_query[q.image_id].ranked_ids[:n]:
                    loc = db[db_id].location
                    dx, dy = q.location[0] - loc[0], q.location[1] - loc[1]
                    if (dx * dx + dy * dy) ** 0.5 <= threshold:
                        hits += 1
                        break
            return 100.0 * hits / len(queries)

        rng = np.random.default_rng(11)
        n_values = (1, 5, 10, 20)
        thresholds = (1.0, 10.0, 100.0)
        for _ in range(100):
            nq = int(rng.integers(5, 40))
            nd = int(rng.integers(20, 60))
            queries = [
                LocalizedImage(f"q{i}", "s", rng.uniform(0, 60, 2), ImageRole.QUERY)
                for i in range(nq)
            ]
            database = [
                LocalizedImage(f"d{i}", "s", rng.uniform(0, 60, 2), ImageRole.DATABASE)
                for i in range(nd)
            ]
            results = [
                RetrievalResult(q.image_id, tuple(f"d{j}" for j in rng.permutation(nd)))
                for q in queries
            ]
            by_threshold = {}
            for threshold in thresholds:
                recalls = recall_at_n(queries, database, results, n_values, threshold)
                for n in n_values:
                    assert recalls[n] == brute_force(queries, database, results, n, threshold)
                values = [recalls[n] for n in n_values]
                assert values == sorted(values)  # monotone in N
                by_threshold[threshold] = values
            for t1, t2 in zip(thresholds, thresholds[1:]):  # monotone in threshold
                assert all(v2 >= v1 for v1, v2 in zip(by_threshold[t1], by_threshold[t2]))


def test_weighted_average_exact():
    with _Criterion("weighted average matches direct formula", 5.0):
        assert weighted_average([(50.0, 100), (70.0, 300)]) == 65.0
        rng = np.random.default_rng(13)
        for _ in range(1000):
            k = int(rng.integers(1, 15))
            recalls = rng.uniform(0, 100, k)
            counts = rng.integers(1, 5000, k)
            table = list(zip(recalls.tolist(), counts.tolist()))
            expected = sum(r * c for r, c in table) / sum(c for _, c in table)
            assert abs(weighted_average(table) - expected) < 1e-9


def test_service_library_equivalence(tmp_path):
    with _Criterion("scripted service session equals CLI --auto-only run", 10.0):
        route = generate_route(num_corners=6, min_turn_deg=50, seed=42)
        trav_a = traverse(route, duration=60, keyframe_rate=2, seed=1, visit_id="a")
        trav_b = traverse(route, duration=90, keyframe_rate=2, seed=2, visit_id="b")
        pair_dir = tmp_path / "pair"
        write_synthetic_pair(pair_dir, route, trav_a, trav_b, 60.0, 90.0)

        # service path: create, accept every proposal, finalize
        store = AnnotationStore(tmp_path / "sessions")
        session = store.create_session(
            "synthetic", pair_dir / "a.csv", pair_dir / "b.csv", 60.0, 90.0
        )
        version = session.version
        for position in range(len(session.state.matches)):
            store.submit_correction(
                session.session_id,
                {"action": "confirm", "position": position},
                expected_version=version,
            )
            version += 1
        artifacts = store.finalize_session(session.session_id)
        service_manifest = [p for p in artifacts if p.endswith("frame_pairs.csv")][0]

        # library path through the CLI
        run_dir = tmp_path / "run"
        cli_result = CliRunner().invoke(
            cli_main,
            [
                "pipeline",
                "--manifest", str(pair_dir / "manifest.yaml"),
                "--auto-only",
                "--run-dir", str(run_dir),
            ],
        )
        assert cli_result.exit_code == 0, cli_result.output
        cli_manifest = run_dir / "pairs" / "a__b" / "frame_pairs.csv"
        assert Path(service_manifest).read_bytes() == cli_manifest.read_bytes()


def test_audit_replay(tmp_path):
    with _Criterion("audit log replay reproduces 50 randomized sessions", 30.0):
        route = generate_route(num_corners=6, min_turn_deg=50, seed=42)
        trav_a = traverse(route, duration=60, keyframe_rate=2, seed=1, visit_id="a")
        trav_b = traverse(route, duration=90, keyframe_rate=2, seed=2, visit_id="b")
        pair_dir = tmp_path / "pair"
        write_synthetic_pair(pair_dir, route, trav_a, trav_b, 60.0, 90.0)
        store = AnnotationStore(tmp_path / "sessions")
        rng = np.random.default_rng(99)

        for round_idx in range(50):
            session = store.create_session(
                "synthetic", pair_dir / "a.csv", pair_dir / "b.csv", 60.0, 90.0
            )
            version = session.version
            applied = 0
            attempts = 0
            target = int(rng.integers(1, 9))
            while applied < target and attempts < 60:
                attempts += 1
                matches = session.state.matches
                action = rng.choice(["confirm", "reject", "set", "add"])
                if action == "set":
                    position = int(rng.integers(len(matches)))
                    kb = int(
                        session.state.points_b[matches[position].index_b].keyframe_index
                        + rng.integers(-3, 4)
                    )
                    wire = {"action": "set", "position": position, "keyframe_b": kb}
                elif action == "add":
                    wire = {
                        "action": "add",
                        "keyframe_a": int(rng.integers(len(session.traj_a))),
                        "keyframe_b": int(rng.integers(len(session.traj_b))),
                    }
                else:
                    wire = {"action": action, "position": int(rng.integers(len(matches)))}
                try:
                    store.submit_correction(session.session_id, wire, expected_version=version)
                except Exception:
                    continue
                version += 1
                applied += 1
            replayed = store.replay(session.session_id)
            assert replayed.matches == session.state.matches
            assert replayed.points_a == session.state.points_a
            assert replayed.points_b == session.state.points_b

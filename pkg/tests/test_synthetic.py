"""Tests for the synthetic route / traversal generator."""

from __future__ import annotations

import numpy as np
import pytest

from topopair.errors import GenerationError, ValidationError
from topopair.matching import fit_transform
from topopair.synthetic import (
    SpeedProfile,
    generate_route,
    traverse,
    true_matching,
    write_synthetic_pair,
)
from topopair.trajectory import load_scene_manifest


class TestGenerateRoute:
    def test_two_corners_straight(self):
        route = generate_route(num_corners=2, seed=1)
        assert route.corners.shape == (2, 2)
        assert route.turn_angles_deg.size == 0

    def test_deterministic_for_seed(self):
        r1 = generate_route(num_corners=6, seed=12)
        r2 = generate_route(num_corners=6, seed=12)
        np.testing.assert_array_equal(r1.corners, r2.corners)

    def test_min_turn_respected(self):
        route = generate_route(num_corners=8, min_turn_deg=45, seed=3)
        assert np.all(route.turn_angles_deg >= 45)

    def test_infeasible_raises(self):
        with pytest.raises(GenerationError):
            generate_route(num_corners=100, bounds=(0, 0, 1, 1), min_turn_deg=45, seed=0)

    def test_position_at_endpoints(self):
        route = generate_route(num_corners=4, seed=5)
        np.testing.assert_allclose(route.position_at(0.0), route.corners[0])
        np.testing.assert_allclose(route.position_at(1.0), route.corners[-1])

    def test_distance_to_is_zero_on_route(self):
        route = generate_route(num_corners=5, seed=6)
        on_route = route.position_at(np.linspace(0, 1, 50))
        assert np.all(route.distance_to(on_route) < 1e-9)


class TestTraverse:
    def test_noise_free_constant_on_route(self):
        route = generate_route(num_corners=4, seed=7)
        trav = traverse(route, duration=30, keyframe_rate=2, seed=1)
        np.testing.assert_allclose(
            trav.trajectory.positions, route.position_at(trav.fractions), atol=1e-12
        )
        np.testing.assert_allclose(
            trav.fractions, trav.trajectory.timestamps / 30.0, atol=1e-12
        )

    def test_rate_doubling_nests(self):
        route = generate_route(num_corners=4, seed=8)
        slow = traverse(route, duration=20, keyframe_rate=2, seed=1)
        fast = traverse(route, duration=20, keyframe_rate=4, seed=1)
        np.testing.assert_allclose(
            fast.trajectory.positions[::2], slow.trajectory.positions, atol=1e-12
        )

    @pytest.mark.parametrize("profile", list(SpeedProfile))
    def test_fractions_non_decreasing(self, profile):
        route = generate_route(num_corners=4, seed=9)
        trav = traverse(route, duration=25, keyframe_rate=3, speed_profile=profile, seed=2)
        assert np.all(np.diff(trav.fractions) >= 0)
        assert trav.fractions[0] == pytest.approx(0.0, abs=1e-12)
        assert trav.fractions[-1] == pytest.approx(1.0, abs=1e-12)

    def test_noise_seeded_deterministic(self):
        route = generate_route(num_corners=4, seed=10)
        t1 = traverse(route, duration=20, keyframe_rate=2, noise_sigma=0.5, seed=3)
        t2 = traverse(route, duration=20, keyframe_rate=2, noise_sigma=0.5, seed=3)
        np.testing.assert_array_equal(t1.trajectory.positions, t2.trajectory.positions)

    def test_corner_keyframes_land_on_corners(self):
        route = generate_route(num_corners=6, seed=11)
        trav = traverse(
            route, duration=40, keyframe_rate=2, seed=4, include_corner_keyframes=True
        )
        for frac, corner in zip(route.corner_fractions[1:-1], route.corners[1:-1]):
            k = int(np.argmin(np.abs(trav.fractions - frac)))
            np.testing.assert_allclose(trav.trajectory.positions[k], corner, atol=1e-9)

    def test_rejects_bad_parameters(self):
        route = generate_route(num_corners=3, seed=12)
        with pytest.raises(ValidationError):
            traverse(route, duration=0, keyframe_rate=2)
        with pytest.raises(ValidationError):
            traverse(route, duration=10, keyframe_rate=2, noise_sigma=-1)


class TestTrueMatching:
    def test_identical_traversals_identity(self):
        route = generate_route(num_corners=5, seed=13)
        trav = traverse(route, duration=30, keyframe_rate=3, seed=5)
        truth = true_matching(trav, trav, route)
        np.testing.assert_array_equal(truth.corner_keyframes_a, truth.corner_keyframes_b)

    def test_different_speeds_within_keyframe_spacing(self):
        route = generate_route(num_corners=5, seed=14)
        trav_a = traverse(route, duration=30, keyframe_rate=4, seed=6)
        trav_b = traverse(route, duration=60, keyframe_rate=4, seed=7)
        truth = true_matching(trav_a, trav_b, route)
        # matched keyframes sit within one keyframe spacing of each corner
        for (ka, kb), corner in zip(truth.pairs(), route.corners):
            spacing_a = route.total_length / (30 * 4)
            spacing_b = route.total_length / (60 * 4)
            assert np.linalg.norm(trav_a.trajectory.positions[ka] - corner) <= spacing_a
            assert np.linalg.norm(trav_b.trajectory.positions[kb] - corner) <= spacing_b

    def test_noise_free_transform_is_identity(self):
        route = generate_route(num_corners=6, seed=15)
        trav_a = traverse(route, duration=30, keyframe_rate=2, seed=8, include_corner_keyframes=True)
        trav_b = traverse(route, duration=45, keyframe_rate=2, seed=9, include_corner_keyframes=True)
        truth = true_matching(trav_a, trav_b, route)
        src = trav_a.trajectory.positions[truth.corner_keyframes_a]
        dst = trav_b.trajectory.positions[truth.corner_keyframes_b]
        tf = fit_transform(src, dst, "affine")
        np.testing.assert_allclose(tf.matrix, np.eye(3), atol=1e-9)
        assert tf.rms_residual < 1e-9


class TestErrorTrend:
    def test_pipeline_error_scales_with_noise(self):
        # median (over seeds) of the mean frame-pair deviation from the
        # route tracks sigma: halving sigma lands between a quarter and
        # the full error band
        from topopair.pipeline import run_pair

        route = generate_route(num_corners=5, min_turn_deg=50, seed=16)
        sigma = 0.005 * route.total_length

        def median_error(s):
            errs = []
            for seed in range(20):
                trav_a = traverse(
                    route, duration=40, keyframe_rate=2, noise_sigma=s,
                    seed=300 + seed, visit_id="a", include_corner_keyframes=True,
                )
                trav_b = traverse(
                    route, duration=60, keyframe_rate=2, noise_sigma=s,
                    seed=400 + seed, visit_id="b", include_corner_keyframes=True,
                )
                result = run_pair(trav_a.trajectory, trav_b.trajectory, 40.0, 60.0)
                locs = np.array([p.location for p in result.frame_pairs])
                errs.append(float(np.mean(route.distance_to(locs))))
            return float(np.median(errs))

        err_full = median_error(sigma)
        err_half = median_error(sigma / 2)
        assert 0.25 * err_full <= err_half <= err_full


class TestWriteSyntheticPair:
    def test_emits_ingestible_files(self, tmp_path):
        route = generate_route(num_corners=4, seed=17)
        trav_a = traverse(route, duration=20, keyframe_rate=2, seed=1, visit_id="a")
        trav_b = traverse(route, duration=30, keyframe_rate=2, seed=2, visit_id="b")
        manifest_path = write_synthetic_pair(tmp_path, route, trav_a, trav_b, 20.0, 30.0)
        manifest = load_scene_manifest(manifest_path)
        traj_a = manifest.load_trajectory("a")
        traj_b = manifest.load_trajectory("b")
        np.testing.assert_allclose(traj_a.positions, trav_a.trajectory.positions, atol=1e-9)
        np.testing.assert_allclose(traj_b.positions, trav_b.trajectory.positions, atol=1e-9)
        assert manifest.pairings == (("a", "b"),)
        assert (tmp_path / "truth.json").exists()

"""Tests for the pipeline configuration and its key-value file format."""

from __future__ import annotations

import pytest

from topopair.config import PipelineConfig, load_config
from topopair.errors import ParseError, ValidationError
from topopair.matching import TransformModel


class TestPipelineConfig:
    def test_defaults(self):
        config = PipelineConfig()
        assert config.epsilon is None
        assert config.angle_threshold_deg == 30.0
        assert config.model is TransformModel.AFFINE
        assert config.n_values == (1, 5, 10, 20)
        assert config.threshold == 10.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"epsilon": -1.0},
            {"angle_threshold_deg": 0.0},
            {"angle_threshold_deg": 180.0},
            {"angle_weight": -0.1},
            {"gap_penalty": -0.1},
            {"window_radius": 0},
            {"n_values": ()},
            {"n_values": (0,)},
            {"threshold": 0.0},
            {"units_per_meter": 0.0},
        ],
    )
    def test_ranges_enforced(self, kwargs):
        with pytest.raises(ValidationError):
            PipelineConfig(**kwargs)

    def test_text_round_trip(self, tmp_path):
        config = PipelineConfig(epsilon=0.5, angle_threshold_deg=40, model="similarity")
        path = tmp_path / "config.txt"
        path.write_text(config.to_text())
        back = load_config(path)
        assert back == config


class TestLoadConfig:
    def test_overrides_defaults(self, tmp_path):
        path = tmp_path / "config.txt"
        path.write_text("# comment\n\nangle_threshold_deg = 45\nn_values = 1,10\n")
        config = load_config(path)
        assert config.angle_threshold_deg == 45.0
        assert config.n_values == (1, 10)
        assert config.threshold == 10.0  # untouched default

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "config.txt"
        path.write_text("no_such_key = 1\n")
        with pytest.raises(ParseError, match="no_such_key"):
            load_config(path)

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "config.txt"
        path.write_text("just some words\n")
        with pytest.raises(ParseError):
            load_config(path)

    def test_bad_value_reports_line(self, tmp_path):
        path = tmp_path / "config.txt"
        path.write_text("threshold = ten\n")
        with pytest.raises(ParseError, match="2|threshold"):
            load_config(path)

    def test_flag_style_override_wins(self, tmp_path):
        # CLI layering: file overrides defaults, explicit kwargs override the file
        from dataclasses import replace

        path = tmp_path / "config.txt"
        path.write_text("threshold = 25\n")
        config = load_config(path)
        assert config.threshold == 25.0
        config = replace(config, threshold=5.0)
        assert config.threshold == 5.0

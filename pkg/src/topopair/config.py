"""Pipeline configuration: defaults, ranges, and the key-value config file."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ParseError, ValidationError
from .evaluation import DEFAULT_N_VALUES, DEFAULT_THRESHOLD
from .matching import DEFAULT_ANGLE_WEIGHT, DEFAULT_GAP_PENALTY, TransformModel
from .turning import DEFAULT_ANGLE_THRESHOLD_DEG


@dataclass(frozen=True)
class PipelineConfig:
    """All tunable pipeline parameters with their documented defaults.

    ``epsilon`` of None means 1% of each trajectory's polyline length.
    """

    epsilon: float | None = None
    angle_threshold_deg: float = DEFAULT_ANGLE_THRESHOLD_DEG
    model: TransformModel = TransformModel.AFFINE
    angle_weight: float = DEFAULT_ANGLE_WEIGHT
    gap_penalty: float = DEFAULT_GAP_PENALTY
    window_radius: int = 10
    n_values: tuple[int, ...] = DEFAULT_N_VALUES
    threshold: float = DEFAULT_THRESHOLD
    units_per_meter: float = 1.0
    output_dir: str = "runs"

    def __post_init__(self):
        if self.epsilon is not None and self.epsilon <= 0:
            raise ValidationError(f"epsilon must be positive, got {self.epsilon}")
        if not (0.0 < self.angle_threshold_deg < 180.0):
            raise ValidationError(
                f"angle_threshold_deg must be in (0, 180), got {self.angle_threshold_deg}"
            )
        if self.angle_weight < 0:
            raise ValidationError(f"angle_weight must be >= 0, got {self.angle_weight}")
        if self.gap_penalty < 0:
            raise ValidationError(f"gap_penalty must be >= 0, got {self.gap_penalty}")
        if self.window_radius < 1:
            raise ValidationError(f"window_radius must be >= 1, got {self.window_radius}")
        if not self.n_values or any(n < 1 for n in self.n_values):
            raise ValidationError(f"n_values must be positive integers, got {self.n_values}")
        if self.threshold <= 0:
            raise ValidationError(f"threshold must be positive, got {self.threshold}")
        if self.units_per_meter <= 0:
            raise ValidationError(f"units_per_meter must be positive, got {self.units_per_meter}")
        object.__setattr__(self, "model", TransformModel(self.model))
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))

    def to_text(self) -> str:
        """Render as the key = value config file format."""
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, TransformModel):
                value = value.value
            elif isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"


_PARSERS = {
    "epsilon": float,
    "angle_threshold_deg": float,
    "model": TransformModel,
    "angle_weight": float,
    "gap_penalty": float,
    "window_radius": int,
    "n_values": lambda s: tuple(int(v) for v in s.split(",")),
    "threshold": float,
    "units_per_meter": float,
    "output_dir": str,
}


def load_config(path: str | Path, base: PipelineConfig | None = None) -> PipelineConfig:
    """Load a key-value config file over the defaults (or an explicit base).

    Lines are ``key = value``; blank lines and ``#`` comments are ignored;
    unknown keys are rejected.
    """
    config = base or PipelineConfig()
    overrides = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ParseError("expected 'key = value'", path=str(path), line=lineno)
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _PARSERS:
            raise ParseError(f"unknown config key {key!r}", path=str(path), line=lineno)
        try:
            overrides[key] = _PARSERS[key](raw.strip())
        except (ValueError, KeyError) as exc:
            raise ParseError(f"bad value for {key!r}: {exc}", path=str(path), line=lineno) from None
    return replace(config, **overrides)

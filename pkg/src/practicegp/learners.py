"""Simulated learner groups and their error/utility dynamics.

Three learner profiles share the same two-component error model: timing
error scales with tempo (bpm / timing_divisor) and pitch error with the
note-range base level.  The bad-pitch group amplifies pitch error by 1.75,
the bad-timing group amplifies timing error by 1.5, and practicing with a
mode cuts the targeted component by the improvement factor (default 50%).

Every stochastic quantity is a multiplicative epsilon ~ N(1, noise_std^2),
drawn independently per component; the two error draws are clamped at zero
so error levels stay non-negative.  Utilities are the pre/post error delta
times a third epsilon, minus a constant mean-utility offset that centers
the data for the zero-mean GP.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .tasks import BPM_MAX, BPM_MIN, NOTE_RANGES, PracticeMode, TaskParameters

__all__ = [
    "LearnerGroup",
    "PerformanceError",
    "SimConfig",
    "performance_error",
    "calc_utility",
    "noise_free_utility",
    "brute_force_mean_utility",
]


class LearnerGroup(enum.Enum):
    """Simulated error-dynamics profiles."""

    BAD_PITCH = "bad_pitch"
    BALANCED = "balanced"
    BAD_TIMING = "bad_timing"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class PerformanceError:
    """K=2 performance error: timing and pitch levels, both >= 0."""

    timing: float
    pitch: float

    def __post_init__(self) -> None:
        if self.timing < 0 or self.pitch < 0:
            raise ValueError(f"error components must be >= 0, got ({self.timing}, {self.pitch})")

    def to_dict(self) -> dict:
        return {"timing": self.timing, "pitch": self.pitch}

    @classmethod
    def from_dict(cls, d: dict) -> "PerformanceError":
        return cls(timing=float(d["timing"]), pitch=float(d["pitch"]))


@dataclass(frozen=True)
class SimConfig:
    """All constants of the simulated error/utility model.

    ``mean_utility=None`` resolves to the noise-free expected utility of a
    balanced learner under uniform (bpm, note_range, mode), computed by
    brute force over the full grid for this config's own constants.

    The shipped defaults are the verbatim simulation constants.  The
    ``figure-calibrated`` preset (timing_divisor=40) is a deliberately
    labeled deviation that widens the pitch-practice region of the ground
    truth policies.
    """

    noise_std: float = 0.0
    mean_utility: float | None = None
    scale_bad_pitch: float = 1.75
    scale_bad_timing: float = 1.5
    improvement_factor: float = 0.5
    pitch_bases: tuple[float, float, float] = (0.5, 1.5, 3.0)
    timing_divisor: float = 10.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "pitch_bases", tuple(self.pitch_bases))
        if self.noise_std < 0:
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std}")
        if not (0 < self.improvement_factor <= 1):
            raise ValueError(f"improvement_factor must be in (0, 1], got {self.improvement_factor}")
        if len(self.pitch_bases) != len(NOTE_RANGES):
            raise ValueError("pitch_bases needs one entry per note_range")
        if not all(a < b for a, b in zip(self.pitch_bases, self.pitch_bases[1:])):
            raise ValueError(f"pitch_bases must be strictly increasing, got {self.pitch_bases}")
        if self.timing_divisor <= 0:
            raise ValueError(f"timing_divisor must be > 0, got {self.timing_divisor}")
        if self.mean_utility is None:
            object.__setattr__(self, "mean_utility", brute_force_mean_utility(self))

    @classmethod
    def preset(cls, name: str, **overrides) -> "SimConfig":
        if name == "verbatim":
            return cls(**overrides)
        if name == "figure-calibrated":
            overrides.setdefault("timing_divisor", 40.0)
            return cls(**overrides)
        raise ValueError(f"unknown preset {name!r} (expected 'verbatim' or 'figure-calibrated')")

    @classmethod
    def from_file(cls, path: str | Path) -> "SimConfig":
        """Load overrides from a JSON or TOML file."""
        path = Path(path)
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib

            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        else:
            with open(path) as fh:
                raw = json.load(fh)
        preset = raw.pop("preset", "verbatim")
        if "pitch_bases" in raw:
            raw["pitch_bases"] = tuple(raw["pitch_bases"])
        return cls.preset(preset, **raw)

    def to_dict(self) -> dict:
        return {
            "noise_std": self.noise_std,
            "mean_utility": self.mean_utility,
            "scale_bad_pitch": self.scale_bad_pitch,
            "scale_bad_timing": self.scale_bad_timing,
            "improvement_factor": self.improvement_factor,
            "pitch_bases": list(self.pitch_bases),
            "timing_divisor": self.timing_divisor,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        if "pitch_bases" in d:
            d["pitch_bases"] = tuple(d["pitch_bases"])
        return cls(**d)

    def noise_free(self) -> "SimConfig":
        return replace(self, noise_std=0.0)


def _epsilon(rng: np.random.Generator, noise_std: float) -> float:
    """One multiplicative noise draw, clamped at zero."""
    return max(float(rng.normal(1.0, noise_std)), 0.0)


def performance_error(
    group: LearnerGroup,
    tp: TaskParameters,
    mode: PracticeMode | None,
    cfg: SimConfig,
    rng: np.random.Generator,
) -> PerformanceError:
    """Simulate one performance of a task, optionally after mode practice.

    Base errors are eps1 * bpm / timing_divisor and eps2 * pitch_base,
    then the group's weak component is amplified, then (post-practice
    only) the practiced component shrinks by the improvement factor.
    Two epsilon draws are consumed per call, also at noise_std = 0.
    """
    timing = _epsilon(rng, cfg.noise_std) * tp.bpm / cfg.timing_divisor
    pitch = _epsilon(rng, cfg.noise_std) * cfg.pitch_bases[tp.note_range]
    if group is LearnerGroup.BAD_PITCH:
        pitch *= cfg.scale_bad_pitch
    elif group is LearnerGroup.BAD_TIMING:
        timing *= cfg.scale_bad_timing
    if mode is PracticeMode.IMP_TIMING:
        timing *= cfg.improvement_factor
    elif mode is PracticeMode.IMP_PITCH:
        pitch *= cfg.improvement_factor
    return PerformanceError(timing=timing, pitch=pitch)


def calc_utility(
    pre: PerformanceError,
    post: PerformanceError,
    cfg: SimConfig,
    rng: np.random.Generator,
) -> float:
    """Utility of one practice: noisy error delta minus the mean offset.

    Returns eps * [(pre.timing - post.timing) + (pre.pitch - post.pitch)]
    - mean_utility with eps ~ N(1, noise_std^2); one draw per call.
    """
    delta = (pre.timing - post.timing) + (pre.pitch - post.pitch)
    eps = float(rng.normal(1.0, cfg.noise_std))
    return eps * delta - cfg.mean_utility


def noise_free_utility(
    group: LearnerGroup,
    tp: TaskParameters,
    mode: PracticeMode,
    cfg: SimConfig,
) -> float:
    """Deterministic raw utility (error delta, no noise, no mean offset)."""
    quiet = cfg.noise_free()
    rng = np.random.default_rng(0)  # draws are consumed but have zero scale
    pre = performance_error(group, tp, None, quiet, rng)
    post = performance_error(group, tp, mode, quiet, rng)
    return (pre.timing - post.timing) + (pre.pitch - post.pitch)


def brute_force_mean_utility(cfg: SimConfig) -> float:
    """Average noise-free balanced-learner utility over the full grid.

    Iterates every (bpm, note_range, mode) combination, 906 cells in all,
    and averages the raw error deltas.  With the verbatim constants this
    comes out at 85/24.
    """
    return _cached_mean_utility(replace(cfg, mean_utility=0.0, noise_std=0.0))


@lru_cache(maxsize=32)
def _cached_mean_utility(base: SimConfig) -> float:
    total = 0.0
    count = 0
    for bpm in range(BPM_MIN, BPM_MAX + 1):
        for nr in NOTE_RANGES:
            tp = TaskParameters(bpm=bpm, note_range=nr)
            for mode in PracticeMode:
                total += noise_free_utility(LearnerGroup.BALANCED, tp, mode, base)
                count += 1
    return total / count

"""Task parameters, GP input encodings, and the score-generation pipeline.

A task is a point on the (bpm, note_range) grid at complexity level 0.
Tasks encode into 3-D GP inputs as [bpm/10, 2*note_range, mode embedding],
with the two practice modes embedded 20 apart so cross-mode covariance is
numerically zero under the default lengthscale.

The score pipeline renders a task into 8 bars of 4/4 (monophonic right
hand, quarter and half notes) and derives per-practice-mode variants:
timing practice flattens every pitch to middle C, pitch practice drops the
tempo constraint entirely.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "BPM_MIN",
    "BPM_MAX",
    "NOTE_RANGES",
    "PITCH_SETS",
    "PracticeMode",
    "Hand",
    "TaskParameters",
    "TaskSampler",
    "Note",
    "TaskData",
    "TargetTask",
    "InvalidStateError",
    "encode",
    "generate_score",
    "apply_practice_mode",
    "build_target_task",
]

BPM_MIN = 50
BPM_MAX = 200
NOTE_RANGES = (0, 1, 2)

BPM_SCALE = 10.0         # GP input is bpm / 10
NOTE_RANGE_SCALE = 2.0   # ordinal note_range stretched to {0, 2, 4}
ONE_HOT_SCALE = 0.2      # alternative: equal-covariance scaled one-hot

SCORE_BARS = 8
BEATS_PER_BAR = 4
TOTAL_BEATS = SCORE_BARS * BEATS_PER_BAR
NOTE_DURATIONS = (1.0, 2.0)  # quarter, half

MIDDLE_C = 60

# Pitch sets per note_range: a five-note C4..G4 white-key range, one octave
# of white keys C4..C5, and the full chromatic octave C4..B4.
PITCH_SETS: dict[int, tuple[int, ...]] = {
    0: (60, 62, 64, 65, 67),
    1: (60, 62, 64, 65, 67, 69, 71, 72),
    2: tuple(range(60, 72)),
}


class InvalidStateError(RuntimeError):
    """Operation not valid for the object's current state."""


class PracticeMode(enum.Enum):
    """The two simulated practice modes and their 1-D GP embeddings."""

    IMP_TIMING = "IMP_TIMING"
    IMP_PITCH = "IMP_PITCH"

    @property
    def embedding(self) -> float:
        return 0.0 if self is PracticeMode.IMP_TIMING else 20.0

    def __str__(self) -> str:  # nicer CSV / CLI rendering
        return self.value


class Hand(enum.Enum):
    LEFT = "LEFT"
    RIGHT = "RIGHT"


@dataclass(frozen=True)
class TaskParameters:
    """One point in task space: complexity level, bpm, note range."""

    bpm: int
    note_range: int
    complexity_level: int = 0

    def __post_init__(self) -> None:
        if self.complexity_level < 0:
            raise ValueError(f"complexity_level must be >= 0, got {self.complexity_level}")
        if not (BPM_MIN <= self.bpm <= BPM_MAX):
            raise ValueError(f"bpm must be in [{BPM_MIN}, {BPM_MAX}], got {self.bpm}")
        if self.note_range not in NOTE_RANGES:
            raise ValueError(f"note_range must be one of {NOTE_RANGES}, got {self.note_range}")

    def to_dict(self) -> dict:
        return {
            "bpm": self.bpm,
            "note_range": self.note_range,
            "complexity_level": self.complexity_level,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TaskParameters":
        return cls(
            bpm=int(d["bpm"]),
            note_range=int(d["note_range"]),
            complexity_level=int(d.get("complexity_level", 0)),
        )


def encode(tp: TaskParameters, mode: PracticeMode, *, one_hot_note_range: bool = False) -> np.ndarray:
    """Encode a (task, practice mode) pair as a GP input vector.

    Default encoding is 3-D: [bpm/10, 2*note_range, mode embedding], which
    treats note_range as ordinal.  With ``one_hot_note_range`` the ordinal
    dimension is replaced by a scaled one-hot block (value 0.2) giving every
    note-range category the same covariance with every other; the vector is
    then 5-D.
    """
    bpm_scaled = tp.bpm / BPM_SCALE
    if one_hot_note_range:
        hot = [0.0, 0.0, 0.0]
        hot[tp.note_range] = ONE_HOT_SCALE
        return np.array([bpm_scaled, *hot, mode.embedding])
    return np.array([bpm_scaled, NOTE_RANGE_SCALE * tp.note_range, mode.embedding])


class TaskSampler:
    """Seeded uniform sampler over the bounded (bpm, note_range) grid.

    Identical seeds yield identical sample sequences.  Each sample draws
    bpm first, then note_range.
    """

    def __init__(self, seed: int, bpm_bounds: tuple[int, int] = (BPM_MIN, BPM_MAX),
                 note_ranges: tuple[int, ...] = NOTE_RANGES):
        self.seed = seed
        self.bpm_bounds = bpm_bounds
        self.note_ranges = note_ranges
        self._rng = np.random.default_rng(seed)

    def sample(self) -> TaskParameters:
        bpm = int(self._rng.integers(self.bpm_bounds[0], self.bpm_bounds[1] + 1))
        note_range = int(self.note_ranges[self._rng.integers(0, len(self.note_ranges))])
        return TaskParameters(bpm=bpm, note_range=note_range)

    @property
    def state(self) -> dict:
        return self._rng.bit_generator.state

    @state.setter
    def state(self, value: dict) -> None:
        self._rng.bit_generator.state = value


@dataclass(frozen=True)
class Note:
    """A single score note in beat units."""

    pitch: int
    onset_beats: float
    duration_beats: float
    hand: Hand = Hand.RIGHT
    finger: int | None = None

    def __post_init__(self) -> None:
        if not (21 <= self.pitch <= 108):
            raise ValueError(f"pitch must be a piano MIDI number in [21, 108], got {self.pitch}")
        if self.onset_beats < 0:
            raise ValueError(f"onset_beats must be >= 0, got {self.onset_beats}")
        if self.duration_beats <= 0:
            raise ValueError(f"duration_beats must be > 0, got {self.duration_beats}")
        if self.finger is not None and not (1 <= self.finger <= 5):
            raise ValueError(f"finger must be in 1..5, got {self.finger}")

    def to_dict(self) -> dict:
        return {
            "pitch": self.pitch,
            "onset_beats": self.onset_beats,
            "duration_beats": self.duration_beats,
            "hand": self.hand.value,
            "finger": self.finger,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Note":
        return cls(
            pitch=int(d["pitch"]),
            onset_beats=float(d["onset_beats"]),
            duration_beats=float(d["duration_beats"]),
            hand=Hand(d.get("hand", "RIGHT")),
            finger=d.get("finger"),
        )


@dataclass(frozen=True)
class TaskData:
    """A rendered score for one task, possibly transformed by a mode.

    ``bpm_effective`` is the playback tempo; ``None`` marks an untimed
    score (the learner sets their own pace, as in pitch practice).
    """

    parameters: TaskParameters
    notes: tuple[Note, ...]
    time_signature: tuple[int, int] = (4, 4)
    bpm_effective: int | None = None
    mode_applied: PracticeMode | None = None

    def __post_init__(self) -> None:
        onsets = [n.onset_beats for n in self.notes]
        if any(onsets[i] > onsets[i + 1] for i in range(len(onsets) - 1)):
            raise ValueError("notes must be sorted by onset")
        allowed = set(PITCH_SETS[self.parameters.note_range])
        for n in self.notes:
            if n.pitch not in allowed:
                raise ValueError(
                    f"pitch {n.pitch} outside the note_range-{self.parameters.note_range} pitch set"
                )

    @property
    def total_beats(self) -> float:
        if not self.notes:
            return 0.0
        last = self.notes[-1]
        return last.onset_beats + last.duration_beats

    def to_dict(self) -> dict:
        return {
            "parameters": self.parameters.to_dict(),
            "notes": [n.to_dict() for n in self.notes],
            "time_signature": list(self.time_signature),
            "bpm_effective": self.bpm_effective,
            "mode_applied": None if self.mode_applied is None else self.mode_applied.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TaskData":
        mode = d.get("mode_applied")
        return cls(
            parameters=TaskParameters.from_dict(d["parameters"]),
            notes=tuple(Note.from_dict(n) for n in d["notes"]),
            time_signature=tuple(d.get("time_signature", (4, 4))),
            bpm_effective=d.get("bpm_effective"),
            mode_applied=None if mode is None else PracticeMode(mode),
        )


@dataclass(frozen=True)
class TargetTask:
    """A main score plus its per-practice-mode variants."""

    main: TaskData
    practice_variants: dict[PracticeMode, TaskData] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for mode, variant in self.practice_variants.items():
            if variant.mode_applied is not mode:
                raise ValueError(f"variant under key {mode} has mode_applied={variant.mode_applied}")

    def to_dict(self) -> dict:
        return {
            "main": self.main.to_dict(),
            "practice_variants": {m.value: v.to_dict() for m, v in self.practice_variants.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TargetTask":
        return cls(
            main=TaskData.from_dict(d["main"]),
            practice_variants={
                PracticeMode(k): TaskData.from_dict(v)
                for k, v in d.get("practice_variants", {}).items()
            },
        )


def generate_score(tp: TaskParameters, seed: int) -> TaskData:
    """Render a task into a deterministic 8-bar monophonic score.

    Pitches are drawn uniformly from the note_range pitch set, durations
    from {quarter, half}; a single-beat remainder always closes with a
    quarter note.  Same (tp, seed) in, identical TaskData out.
    """
    rng = np.random.default_rng(seed)
    pitch_set = PITCH_SETS[tp.note_range]
    notes = []
    onset = 0.0
    remaining = float(TOTAL_BEATS)
    while remaining > 0:
        if remaining < 2.0:
            duration = 1.0
        else:
            duration = NOTE_DURATIONS[rng.integers(0, len(NOTE_DURATIONS))]
        pitch = int(pitch_set[rng.integers(0, len(pitch_set))])
        notes.append(Note(pitch=pitch, onset_beats=onset, duration_beats=duration))
        onset += duration
        remaining -= duration
    return TaskData(
        parameters=tp,
        notes=tuple(notes),
        time_signature=(4, BEATS_PER_BAR),
        bpm_effective=tp.bpm,
    )


def apply_practice_mode(data: TaskData, mode: PracticeMode) -> TaskData:
    """Derive the practice variant of a score.

    Timing practice substitutes every pitch with middle C and keeps the
    rhythm; pitch practice keeps the notes and removes the tempo
    (bpm_effective becomes None, i.e. the learner plays as slowly as they
    want).  Applying a mode twice is an error.
    """
    if data.mode_applied is not None:
        raise InvalidStateError(f"practice mode {data.mode_applied} already applied")
    if mode is PracticeMode.IMP_TIMING:
        notes = tuple(replace(n, pitch=MIDDLE_C) for n in data.notes)
        return replace(data, notes=notes, mode_applied=mode)
    return replace(data, bpm_effective=None, mode_applied=mode)


def build_target_task(tp: TaskParameters, seed: int) -> TargetTask:
    """Generate the main score and both practice-mode variants."""
    main = generate_score(tp, seed)
    variants = {mode: apply_practice_mode(main, mode) for mode in PracticeMode}
    return TargetTask(main=main, practice_variants=variants)

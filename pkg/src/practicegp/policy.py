"""Practice-mode selection, ground-truth policies, policy loss, training.

A policy maps every (bpm, note_range) grid point to one of the two
practice modes; the full grid has 151 x 3 = 453 points.  The GP-induced
policy is the argmax of the two posterior means at each point.  Policy
quality is measured as normalized missed utility against the noise-free
optimum:

    policy_loss = sum_T (u_opt - u_selected) / (median_T (u_opt - u_other) * |T|)

The training loop mirrors the simulated protocol: draw a random task, let
the simulated learner perform it, pick the mode with the highest expected
utility, observe the post-practice error, and feed the centered utility
back into the GP.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .gp import GpModel, KernelParams, fit_hyperparameters
from .learners import LearnerGroup, SimConfig, calc_utility, noise_free_utility, performance_error
from .tasks import BPM_MAX, BPM_MIN, NOTE_RANGES, PracticeMode, TaskParameters, TaskSampler, encode

__all__ = [
    "BPM_VALUES",
    "GRID_SIZE",
    "PolicyGrid",
    "GpConfig",
    "TraceRecord",
    "TrainingTrace",
    "TrainingFailure",
    "CellFailure",
    "ExperimentResult",
    "DegenerateMetricError",
    "get_practice_mode",
    "ground_truth_policy",
    "policy_loss",
    "induced_policy",
    "encoded_mode_grid",
    "train",
    "run_experiment",
    "derive_seed",
]

BPM_VALUES = tuple(range(BPM_MIN, BPM_MAX + 1))
GRID_SIZE = len(BPM_VALUES) * len(NOTE_RANGES)

_MODE_ORDER = (PracticeMode.IMP_TIMING, PracticeMode.IMP_PITCH)
_U64 = (1 << 64) - 1


class DegenerateMetricError(ValueError):
    """The policy-loss normalizer (median max-loss) is zero."""


def derive_seed(master_seed: int, index: int) -> int:
    """Per-run seed: (master + index) pushed through a SplitMix64 round."""
    x = (master_seed + index) & _U64
    x = (x + 0x9E3779B97F4A7C15) & _U64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _U64
    return (x ^ (x >> 31)) & _U64


class PolicyGrid:
    """A practice mode for every (bpm, note_range) grid point.

    Stored as a (3, 151) uint8 array with 0 = IMP_TIMING, 1 = IMP_PITCH;
    rows are note ranges, columns bpm values.
    """

    def __init__(self, modes: np.ndarray):
        modes = np.asarray(modes, dtype=np.uint8)
        expected = (len(NOTE_RANGES), len(BPM_VALUES))
        if modes.shape != expected:
            raise ValueError(f"policy grid must have shape {expected}, got {modes.shape}")
        if np.any(modes > 1):
            raise ValueError("policy grid entries must be 0 (IMP_TIMING) or 1 (IMP_PITCH)")
        self.modes = modes

    @classmethod
    def from_function(cls, fn) -> "PolicyGrid":
        """Build from fn(bpm, note_range) -> PracticeMode."""
        modes = np.zeros((len(NOTE_RANGES), len(BPM_VALUES)), dtype=np.uint8)
        for i, nr in enumerate(NOTE_RANGES):
            for j, bpm in enumerate(BPM_VALUES):
                modes[i, j] = _MODE_ORDER.index(fn(bpm, nr))
        return cls(modes)

    def mode_at(self, bpm: int, note_range: int) -> PracticeMode:
        return _MODE_ORDER[self.modes[NOTE_RANGES.index(note_range), BPM_VALUES.index(bpm)]]

    def entries(self):
        """Iterate ((bpm, note_range), mode) over all 453 points."""
        for i, nr in enumerate(NOTE_RANGES):
            for j, bpm in enumerate(BPM_VALUES):
                yield (bpm, nr), _MODE_ORDER[self.modes[i, j]]

    def agreement(self, other: "PolicyGrid") -> float:
        """Fraction of grid points on which two policies agree."""
        return float(np.mean(self.modes == other.modes))

    def flipped(self) -> "PolicyGrid":
        """The anti-policy: the other mode at every point."""
        return PolicyGrid(1 - self.modes)

    def __eq__(self, other) -> bool:
        return isinstance(other, PolicyGrid) and bool(np.array_equal(self.modes, other.modes))

    def to_rows(self) -> list[tuple[int, int, str]]:
        """CSV-ready (bpm, note_range, mode) rows in grid order."""
        return [(bpm, nr, mode.value) for (bpm, nr), mode in self.entries()]

    def to_dense_dict(self) -> dict:
        """Dense JSON layout for the UI heatmap: rows by note_range."""
        return {
            "bpm_values": list(BPM_VALUES),
            "note_ranges": list(NOTE_RANGES),
            "mode_names": [m.value for m in _MODE_ORDER],
            "modes": self.modes.tolist(),
        }

    @classmethod
    def from_dense_dict(cls, d: dict) -> "PolicyGrid":
        return cls(np.asarray(d["modes"], dtype=np.uint8))


@dataclass(frozen=True)
class GpConfig:
    """GP side of a training run: kernel defaults, optional refit, UCB beta.

    ``refit_every`` > 0 re-selects hyperparameters from ``refit_grid`` by
    grid-search marginal likelihood each time that many points accumulate
    (off by default so runs stay deterministic and cheap).
    ``acquisition_beta`` > 0 switches mode selection from pure posterior
    mean to mean + beta * std.
    """

    params: KernelParams = field(default_factory=KernelParams)
    refit_every: int = 0
    refit_grid: tuple[KernelParams, ...] = ()
    acquisition_beta: float = 0.0


@lru_cache(maxsize=4)
def encoded_mode_grid(mode: PracticeMode) -> np.ndarray:
    """Encoded GP inputs for every grid point under one mode, row-major
    (note_range outer, bpm inner)."""
    return np.vstack(
        [
            encode(TaskParameters(bpm=bpm, note_range=nr), mode)
            for nr in NOTE_RANGES
            for bpm in BPM_VALUES
        ]
    )


def induced_policy(gp) -> PolicyGrid:
    """Argmax of the two posterior-mean surfaces; ties go to IMP_TIMING."""
    mean_t = gp.predict_mean_batch(encoded_mode_grid(PracticeMode.IMP_TIMING))
    mean_p = gp.predict_mean_batch(encoded_mode_grid(PracticeMode.IMP_PITCH))
    shape = (len(NOTE_RANGES), len(BPM_VALUES))
    return PolicyGrid((mean_p > mean_t).reshape(shape).astype(np.uint8))


def get_practice_mode(
    gp,
    tp: TaskParameters,
    rng: np.random.Generator,
    beta: float = 0.0,
) -> PracticeMode:
    """Select the practice mode with the highest expected utility.

    Scores each mode by the GP posterior at its encoded input (mean, or
    mean + beta * std for beta > 0) and returns the argmax; exact ties are
    broken uniformly at random with ``rng``.  Any object with a
    ``predict(x) -> Posterior`` method works as the model.
    """
    scores = []
    for mode in _MODE_ORDER:
        post = gp.predict(encode(tp, mode))
        scores.append(post.mean + beta * post.std if beta else post.mean)
    if scores[0] == scores[1]:
        return _MODE_ORDER[rng.integers(0, len(_MODE_ORDER))]
    return _MODE_ORDER[int(np.argmax(scores))]


class PolicyEvaluator:
    """Caches grid utilities and encodings for fast per-iteration scoring."""

    def __init__(self, group: LearnerGroup, cfg: SimConfig):
        self.group = group
        self.cfg = cfg
        shape = (len(NOTE_RANGES), len(BPM_VALUES))
        self.u_timing = np.zeros(shape)
        self.u_pitch = np.zeros(shape)
        for i, nr in enumerate(NOTE_RANGES):
            for j, bpm in enumerate(BPM_VALUES):
                tp = TaskParameters(bpm=bpm, note_range=nr)
                self.u_timing[i, j] = noise_free_utility(group, tp, PracticeMode.IMP_TIMING, cfg)
                self.u_pitch[i, j] = noise_free_utility(group, tp, PracticeMode.IMP_PITCH, cfg)
        self.u_opt = np.maximum(self.u_timing, self.u_pitch)
        self.loss_max = np.abs(self.u_timing - self.u_pitch)
        self.median_loss_max = float(np.median(self.loss_max))

    def optimal_policy(self) -> PolicyGrid:
        # ties (u_timing == u_pitch) resolve to IMP_TIMING
        return PolicyGrid((self.u_pitch > self.u_timing).astype(np.uint8))

    def loss(self, policy: PolicyGrid) -> float:
        if self.median_loss_max == 0:
            raise DegenerateMetricError(
                "median max-loss over the grid is zero; policy loss is undefined"
            )
        u_sel = np.where(policy.modes == 1, self.u_pitch, self.u_timing)
        return float(np.sum(self.u_opt - u_sel) / (self.median_loss_max * policy.modes.size))

    def induced_policy(self, gp: GpModel) -> PolicyGrid:
        return induced_policy(gp)


def ground_truth_policy(group: LearnerGroup, cfg: SimConfig) -> PolicyGrid:
    """Noise-free argmax-utility mode per grid point; ties to IMP_TIMING."""
    return PolicyEvaluator(group, cfg).optimal_policy()


def policy_loss(policy: PolicyGrid, group: LearnerGroup, cfg: SimConfig) -> float:
    """Normalized missed utility of a policy over the full grid."""
    return PolicyEvaluator(group, cfg).loss(policy)


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    task: TaskParameters
    mode: PracticeMode
    utility: float
    policy_loss: float


@dataclass
class TrainingTrace:
    """Per-iteration record of one training run."""

    group: LearnerGroup
    noise_std: float
    seed: int
    records: list[TraceRecord] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.records[-1].policy_loss

    def losses(self) -> list[float]:
        return [r.policy_loss for r in self.records]


class TrainingFailure(RuntimeError):
    """A run aborted mid-loop; carries the trace up to the failure point."""

    def __init__(self, message: str, trace: TrainingTrace):
        super().__init__(message)
        self.trace = trace


def train(
    group: LearnerGroup,
    cfg: SimConfig,
    gp_config: GpConfig,
    num_iter: int,
    seed: int,
) -> tuple[TrainingTrace, GpModel]:
    """Run the GP training loop for ``num_iter`` iterations.

    Each iteration: sample task parameters, measure the pre-practice
    error, let the GP pick a practice mode (ties random), measure the
    post-practice error, convert to a centered utility, and add the
    encoded observation to the GP.  After each addition the induced
    policy's loss is recorded.

    Sub-streams are derived from ``seed`` with :func:`derive_seed`:
    index 1 seeds the task sampler, index 2 the noise/tie-break stream.
    Numerical failure raises :class:`TrainingFailure` with the partial
    trace attached.
    """
    if num_iter < 1:
        raise ValueError(f"num_iter must be >= 1, got {num_iter}")
    sampler = TaskSampler(derive_seed(seed, 1))
    rng = np.random.default_rng(derive_seed(seed, 2))
    gp = GpModel(gp_config.params)
    evaluator = PolicyEvaluator(group, cfg)
    trace = TrainingTrace(group=group, noise_std=cfg.noise_std, seed=seed)
    for iteration in range(1, num_iter + 1):
        try:
            tp = sampler.sample()
            error_pre = performance_error(group, tp, None, cfg, rng)
            mode = get_practice_mode(gp, tp, rng, beta=gp_config.acquisition_beta)
            error_post = performance_error(group, tp, mode, cfg, rng)
            utility = calc_utility(error_pre, error_post, cfg, rng)
            gp.add_data_point(encode(tp, mode), utility)
            if (
                gp_config.refit_every > 0
                and gp.n_points >= 2
                and gp.n_points % gp_config.refit_every == 0
                and gp_config.refit_grid
            ):
                gp.params = fit_hyperparameters(gp, gp_config.refit_grid)
            loss = evaluator.loss(evaluator.induced_policy(gp))
        except Exception as exc:  # keep the partial trace for the caller
            raise TrainingFailure(f"iteration {iteration}: {exc}", trace) from exc
        trace.records.append(TraceRecord(iteration, tp, mode, utility, loss))
    return trace, gp


@dataclass(frozen=True)
class CellFailure:
    group: LearnerGroup
    noise_std: float
    run: int
    message: str


@dataclass
class ExperimentResult:
    """All traces of a (group x noise x run) sweep plus any failures."""

    traces: list[TrainingTrace]
    failures: list[CellFailure]
    num_iter: int
    master_seed: int

    def to_rows(self) -> list[tuple[str, float, int, int, float]]:
        """Tidy (group, noise, run, iteration, policy_loss) rows."""
        rows = []
        by_cell: dict[tuple[str, float], int] = {}
        for trace in self.traces:
            key = (trace.group.value, trace.noise_std)
            run = by_cell.get(key, 0)
            by_cell[key] = run + 1
            for rec in trace.records:
                rows.append((trace.group.value, trace.noise_std, run, rec.iteration, rec.policy_loss))
        return rows

    def aggregate(self) -> list[tuple[str, float, int, float, float]]:
        """(group, noise, iteration, mean, std) across runs; std has ddof=1."""
        cells: dict[tuple[str, float], list[TrainingTrace]] = {}
        for trace in self.traces:
            cells.setdefault((trace.group.value, trace.noise_std), []).append(trace)
        out = []
        for (group, noise), traces in cells.items():
            losses = np.array([t.losses() for t in traces])  # (runs, iters)
            means = losses.mean(axis=0)
            stds = losses.std(axis=0, ddof=1) if losses.shape[0] > 1 else np.zeros(losses.shape[1])
            for it in range(losses.shape[1]):
                out.append((group, noise, it + 1, float(means[it]), float(stds[it])))
        return out

    def final_losses(self, group: LearnerGroup, noise_std: float) -> list[float]:
        return [
            t.final_loss
            for t in self.traces
            if t.group is group and t.noise_std == noise_std
        ]


def _run_cell(args) -> tuple[list[TrainingTrace], list[CellFailure]]:
    group, noise, run_seeds, cfg, gp_config, num_iter = args
    cell_cfg = (
        cfg if cfg.noise_std == noise else
        SimConfig.from_dict({**cfg.to_dict(), "noise_std": noise})
    )
    traces: list[TrainingTrace] = []
    failures: list[CellFailure] = []
    for run, run_seed in enumerate(run_seeds):
        try:
            trace, _ = train(group, cell_cfg, gp_config, num_iter, run_seed)
            traces.append(trace)
        except Exception as exc:
            failures.append(CellFailure(group, noise, run, str(exc)))
    return traces, failures


def run_experiment(
    groups,
    noise_levels,
    runs_per_cell: int,
    num_iter: int,
    seed: int,
    cfg: SimConfig | None = None,
    gp_config: GpConfig | None = None,
    jobs: int = 1,
) -> ExperimentResult:
    """Train every (group, noise) cell ``runs_per_cell`` times.

    Run seeds come from :func:`derive_seed` applied to the master seed and
    a global run index that enumerates (group, noise, run) in order, so
    results are reproducible regardless of the level of parallelism.  A
    failed run is recorded per cell without aborting the others.
    """
    if runs_per_cell < 1:
        raise ValueError(f"runs_per_cell must be >= 1, got {runs_per_cell}")
    cfg = cfg if cfg is not None else SimConfig()
    gp_config = gp_config if gp_config is not None else GpConfig()
    groups = list(groups)
    noise_levels = list(noise_levels)
    cells = []
    index = 0
    for group in groups:
        for noise in noise_levels:
            run_seeds = [derive_seed(seed, index + run) for run in range(runs_per_cell)]
            index += runs_per_cell
            cells.append((group, float(noise), run_seeds, cfg, gp_config, num_iter))
    if jobs > 1 and len(cells) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=min(jobs, len(cells))) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]
    traces: list[TrainingTrace] = []
    failures: list[CellFailure] = []
    for cell_traces, cell_failures in results:
        traces.extend(cell_traces)
        failures.extend(cell_failures)
    return ExperimentResult(traces=traces, failures=failures, num_iter=num_iter, master_seed=seed)

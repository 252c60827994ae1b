"""Delimited outputs and matplotlib figures for the CLI report paths.

Every writer here is byte-deterministic for fixed inputs: floats are
rendered with repr (shortest round-trip form), figure dates/software tags
are stripped, and the SVG hash salt is pinned.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "practicegp"

import matplotlib.pyplot as plt
import numpy as np

from .policy import BPM_VALUES, ExperimentResult, PolicyGrid
from .tasks import NOTE_RANGES, PracticeMode

# paper-style legend: purple = timing practice, yellow = pitch practice
MODE_COLORS = {PracticeMode.IMP_TIMING: "#440154", PracticeMode.IMP_PITCH: "#fde725"}

_FIG_METADATA = {"png": {"Software": None}, "svg": {"Date": None}}


def _save_figure(fig, path: Path) -> None:
    fmt = path.suffix.lstrip(".").lower()
    fig.savefig(path, metadata=_FIG_METADATA.get(fmt, {}))
    plt.close(fig)


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_json(path: Path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- policy grids -----------------------------------------------------------


def write_policy_table(policy: PolicyGrid, path: Path, fmt: str) -> Path:
    out = path.with_suffix(f".{fmt}")
    if fmt == "csv":
        write_csv(out, ["bpm", "note_range", "mode"], policy.to_rows())
    else:
        write_json(out, policy.to_dense_dict())
    return out


def save_policy_heatmap(policy: PolicyGrid, path: Path, title: str) -> Path:
    fig, ax = plt.subplots(figsize=(8, 2.6))
    cmap = matplotlib.colors.ListedColormap(
        [MODE_COLORS[PracticeMode.IMP_TIMING], MODE_COLORS[PracticeMode.IMP_PITCH]]
    )
    ax.imshow(
        policy.modes,
        aspect="auto",
        origin="lower",
        interpolation="nearest",
        cmap=cmap,
        vmin=0,
        vmax=1,
        extent=(BPM_VALUES[0] - 0.5, BPM_VALUES[-1] + 0.5, -0.5, 2.5),
    )
    ax.set_xlabel("bpm")
    ax.set_ylabel("note range")
    ax.set_yticks(list(NOTE_RANGES))
    ax.set_title(title)
    handles = [
        matplotlib.patches.Patch(color=MODE_COLORS[m], label=m.value) for m in PracticeMode
    ]
    ax.legend(handles=handles, loc="upper right", fontsize=8)
    fig.tight_layout()
    _save_figure(fig, path)
    return path


# -- convergence experiment ---------------------------------------------------


def write_experiment_table(result: ExperimentResult, path: Path, fmt: str) -> Path:
    out = path.with_suffix(f".{fmt}")
    header = ["group", "noise", "run", "iteration", "policy_loss"]
    if fmt == "csv":
        write_csv(out, header, result.to_rows())
    else:
        write_json(out, [dict(zip(header, row)) for row in result.to_rows()])
    return out


def write_experiment_summary(result: ExperimentResult, path: Path) -> Path:
    rows = result.aggregate()
    write_csv(path, ["group", "noise", "iteration", "mean_policy_loss", "std_policy_loss"], rows)
    return path


def save_convergence_figure(result: ExperimentResult, path: Path) -> Path:
    """Mean policy-loss curves with +/- one std bands, one panel per group."""
    groups = sorted({t.group for t in result.traces}, key=lambda g: g.value)
    if not groups:
        fig, ax = plt.subplots(figsize=(4, 3))
        ax.set_title("no traces")
        _save_figure(fig, path)
        return path
    agg: dict = {}
    for group, noise, it, mean, std in result.aggregate():
        agg.setdefault((group, noise), []).append((it, mean, std))
    noises = sorted({key[1] for key in agg})
    fig, axes = plt.subplots(1, len(groups), figsize=(4.2 * len(groups), 3.2), sharey=True)
    axes = np.atleast_1d(axes)
    for ax, group in zip(axes, groups):
        for noise in noises:
            series = agg.get((group.value, noise))
            if not series:
                continue
            series.sort()
            its = [s[0] for s in series]
            means = np.array([s[1] for s in series])
            stds = np.array([s[2] for s in series])
            ax.plot(its, means, label=f"noise {noise:g}")
            ax.fill_between(its, means - stds, means + stds, alpha=0.25)
        ax.set_title(group.value)
        ax.set_xlabel("iteration")
    axes[0].set_ylabel("policy loss")
    axes[-1].legend(fontsize=8)
    fig.tight_layout()
    _save_figure(fig, path)
    return path


# -- posterior surfaces -------------------------------------------------------


def posterior_grid_rows(gp) -> list[tuple[int, int, str, float, float]]:
    """(bpm, note_range, mode, mean, std) over the full grid."""
    from .tasks import TaskParameters, encode

    rows = []
    for mode in PracticeMode:
        X = np.vstack(
            [
                encode(TaskParameters(bpm=bpm, note_range=nr), mode)
                for nr in NOTE_RANGES
                for bpm in BPM_VALUES
            ]
        )
        means, variances = gp.predict_batch(X)
        stds = np.sqrt(variances)
        i = 0
        for nr in NOTE_RANGES:
            for bpm in BPM_VALUES:
                rows.append((bpm, nr, mode.value, float(means[i]), float(stds[i])))
                i += 1
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return rows


def write_posterior_table(gp, path: Path, fmt: str) -> Path:
    out = path.with_suffix(f".{fmt}")
    header = ["bpm", "note_range", "mode", "mean", "std"]
    rows = posterior_grid_rows(gp)
    if fmt == "csv":
        write_csv(out, header, rows)
    else:
        write_json(out, [dict(zip(header, row)) for row in rows])
    return out


def save_posterior_figure(gp, path: Path) -> Path:
    """Mean and std per practice mode, lines per note range over bpm."""
    rows = posterior_grid_rows(gp)
    by_mode: dict = {m.value: {nr: {"bpm": [], "mean": [], "std": []} for nr in NOTE_RANGES} for m in PracticeMode}
    for bpm, nr, mode, mean, std in rows:
        series = by_mode[mode][nr]
        series["bpm"].append(bpm)
        series["mean"].append(mean)
        series["std"].append(std)
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    for col, mode in enumerate(PracticeMode):
        for nr in NOTE_RANGES:
            series = by_mode[mode.value][nr]
            axes[0, col].plot(series["bpm"], series["mean"], label=f"note range {nr}")
            axes[1, col].plot(series["bpm"], series["std"], label=f"note range {nr}")
        axes[0, col].set_title(f"{mode.value} mean")
        axes[1, col].set_title(f"{mode.value} std")
        axes[1, col].set_xlabel("bpm")
    axes[0, 0].legend(fontsize=8)
    fig.tight_layout()
    _save_figure(fig, path)
    return path

"""Command-line entry point: ground-truth grids, simulated experiments,
posterior inspection, score generation, and the HTTP service.

Every subcommand that takes a seed writes byte-identical files on repeated
runs.  Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .gp import GpModel, KernelParams
from .learners import LearnerGroup, SimConfig
from .policy import GpConfig, ground_truth_policy, run_experiment, train
from .tasks import PracticeMode, TaskParameters, apply_practice_mode, generate_score

DEFAULT_NOISE_LEVELS = (0.0, 0.25, 0.5)


def _seed(value: str) -> int:
    iv = int(value)
    if not (0 <= iv < 2**64):
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return iv


def _group(value: str) -> LearnerGroup:
    return LearnerGroup(value)


def _bpm(value: str) -> int:
    iv = int(value)
    if not (50 <= iv <= 200):
        raise argparse.ArgumentTypeError("bpm must be in [50, 200]")
    return iv


def _sim_config(args) -> SimConfig:
    if getattr(args, "config", None):
        cfg = SimConfig.from_file(args.config)
    else:
        cfg = SimConfig.preset(args.preset)
    return cfg


def _gp_config(args) -> GpConfig:
    base = KernelParams()
    params = KernelParams(
        lengthscale=args.gp_lengthscale if args.gp_lengthscale is not None else base.lengthscale,
        variance=args.gp_variance if args.gp_variance is not None else base.variance,
        noise_variance=(
            args.gp_noise_variance if args.gp_noise_variance is not None else base.noise_variance
        ),
    )
    return GpConfig(params=params)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _add_common(parser, *, preset: bool = True, out: bool = True, fmt: bool = True,
                gp: bool = False) -> None:
    if preset:
        parser.add_argument("--preset", choices=("verbatim", "figure-calibrated"),
                            default="verbatim", help="simulation constant preset")
        parser.add_argument("--config", type=Path, default=None,
                            help="JSON/TOML file with simulation config overrides")
    if out:
        parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    if fmt:
        parser.add_argument("--format", choices=("csv", "json"), default="csv",
                            help="tabular output format")
    if gp:
        parser.add_argument("--gp-lengthscale", type=float, default=None)
        parser.add_argument("--gp-variance", type=float, default=None)
        parser.add_argument("--gp-noise-variance", type=float, default=None)


def cmd_ground_truth(args) -> int:
    from . import reports

    cfg = _sim_config(args)
    out = _out_dir(args)
    policy = ground_truth_policy(args.group, cfg)
    table = reports.write_policy_table(policy, out / f"policy_{args.group.value}", args.format)
    figure = reports.save_policy_heatmap(
        policy, out / f"policy_{args.group.value}.png",
        f"ground truth policy ({args.group.value})",
    )
    print(table)
    print(figure)
    return 0


def cmd_simulate(args) -> int:
    from . import reports

    cfg = _sim_config(args)
    out = _out_dir(args)
    result = run_experiment(
        groups=args.groups,
        noise_levels=args.noise,
        runs_per_cell=args.runs,
        num_iter=args.iters,
        seed=args.seed,
        cfg=cfg,
        gp_config=_gp_config(args),
        jobs=args.jobs,
    )
    table = reports.write_experiment_table(result, out / "experiment", args.format)
    summary = reports.write_experiment_summary(result, out / "experiment_summary.csv")
    figure = reports.save_convergence_figure(result, out / "convergence.svg")
    for failure in result.failures:
        print(
            f"run failed: group={failure.group.value} noise={failure.noise_std} "
            f"run={failure.run}: {failure.message}",
            file=sys.stderr,
        )
    print(table)
    print(summary)
    print(figure)
    return 0


def cmd_train(args) -> int:
    from . import reports

    cfg = _sim_config(args)
    if args.noise is not None:
        cfg = SimConfig.from_dict({**cfg.to_dict(), "noise_std": args.noise})
    out = _out_dir(args)
    trace, gp = train(args.group, cfg, _gp_config(args), args.iters, args.seed)
    model_path = out / "model.json"
    with open(model_path, "w") as fh:
        json.dump(gp.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    trace_path = out / "trace.csv"
    reports.write_csv(
        trace_path,
        ["iteration", "bpm", "note_range", "mode", "utility", "policy_loss"],
        [
            (r.iteration, r.task.bpm, r.task.note_range, r.mode.value, r.utility, r.policy_loss)
            for r in trace.records
        ],
    )
    print(model_path)
    print(trace_path)
    return 0


def cmd_posterior(args) -> int:
    from . import reports

    model_path = Path(args.model)
    if not model_path.exists():
        print(f"model file not found: {model_path}", file=sys.stderr)
        return 1
    with open(model_path) as fh:
        gp = GpModel.from_dict(json.load(fh))
    out = _out_dir(args)
    table = reports.write_posterior_table(gp, out / "posterior", args.format)
    figure = reports.save_posterior_figure(gp, out / "posterior.png")
    print(table)
    print(figure)
    return 0


def cmd_generate_score(args) -> int:
    tp = TaskParameters(bpm=args.bpm, note_range=args.note_range)
    data = generate_score(tp, args.seed)
    if args.mode is not None:
        data = apply_practice_mode(data, args.mode)
    blob = json.dumps(data.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out is None:
        sys.stdout.write(blob)
    else:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(blob)
        print(args.out)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(state_dir=args.state_dir, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="practicegp",
        description="Practice-mode scaffolding: GP utility models over simulated piano learners.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ground-truth", help="write the optimal policy grid for a learner group")
    p.add_argument("--group", type=_group, required=True,
                   choices=list(LearnerGroup), metavar="{bad_pitch,balanced,bad_timing}")
    _add_common(p)
    p.set_defaults(func=cmd_ground_truth)

    p = sub.add_parser("simulate", help="run the convergence experiment over groups x noise levels")
    p.add_argument("--groups", type=_group, nargs="+", default=list(LearnerGroup),
                   metavar="GROUP", help="learner groups (default: all three)")
    p.add_argument("--noise", type=float, nargs="*", default=list(DEFAULT_NOISE_LEVELS),
                   help="utility noise standard deviations")
    p.add_argument("--runs", type=int, default=27, help="runs per (group, noise) cell")
    p.add_argument("--iters", type=int, default=100, help="training iterations per run")
    p.add_argument("--seed", type=_seed, default=20240, help="master seed")
    p.add_argument("--jobs", type=int, default=max(1, min(os.cpu_count() or 1, 8)),
                   help="parallel worker processes for cells (results independent of this)")
    _add_common(p, gp=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train one GP and save its model snapshot plus trace")
    p.add_argument("--group", type=_group, required=True,
                   choices=list(LearnerGroup), metavar="{bad_pitch,balanced,bad_timing}")
    p.add_argument("--noise", type=float, default=None, help="utility noise std override")
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--seed", type=_seed, default=0)
    _add_common(p, gp=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("posterior", help="dump posterior mean/std over the task grid for a model")
    p.add_argument("--model", type=Path, required=True, help="GP model JSON produced by train")
    _add_common(p, preset=False)
    p.set_defaults(func=cmd_posterior)

    p = sub.add_parser("generate-score", help="render a task as a JSON score")
    p.add_argument("--bpm", type=_bpm, required=True)
    p.add_argument("--note-range", type=int, required=True, choices=(0, 1, 2))
    p.add_argument("--mode", type=PracticeMode, default=None,
                   choices=list(PracticeMode), metavar="{IMP_TIMING,IMP_PITCH}")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", type=Path, default=None, help="output file (default: stdout)")
    p.set_defaults(func=cmd_generate_score)

    p = sub.add_parser("serve", help="run the scaffolding HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--state-dir", type=Path, default=Path("sessions"))
    p.add_argument("--ui-dir", type=Path, default=None,
                   help="directory with the built web client, served at /")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # uniform runtime-failure exit code
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

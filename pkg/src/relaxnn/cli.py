"""Command-line entry point: train, reference, evaluate, uq, grad-check.

Output layout under ``--out`` (default: the config's ``out``)::

    config.cfg                 effective configuration
    history.jsonl              loss history, one line per epoch
    points.csv                 collocation points
    checkpoints/u_final.bin    (and v_final.bin, periodic u_epochN.bin ...)
    reference/snapshot_t*.csv  finite-volume reference on the evaluation grid
    reference/moments_t*.csv   reference mean/variance (stochastic problems)
    eval/                      error_report.csv, abs_error.csv, slice_t*.csv
    uq/                        moments_t*.csv, uq_report.csv
    grad_check.csv
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .fvref import FVError, Grid1D
from .metrics import (
    ReferenceField,
    evaluate,
    load_reference,
    reference_solution,
    relative_l2,
    write_report,
)
from .mlp import ParamSet
from .systems import primitive_to_conserved
from .trainer import TrainingDiverged, format_number, save_checkpoint, train, write_history
from .uq import (
    fv_reference_moments,
    gauss_legendre,
    mc_mean_variance,
    quad_mean_variance,
    uniform_sampler,
)
from .verify import run_all

log = logging.getLogger("relaxnn")


class CliError(RuntimeError):
    pass


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config file")
    common.add_argument("--seed", type=int, help="override the training seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--epochs", type=int, help="override the number of epochs")
    common.add_argument("--mode", choices=cfgmod.MODES)
    common.add_argument("--relax-type", type=int, choices=(1, 2, 3))
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="relaxnn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="train u (and v) networks")
    sub.add_parser("reference", parents=[common], help="finite-volume reference snapshots")
    ev = sub.add_parser("evaluate", parents=[common], help="error report against the reference")
    ev.add_argument("--checkpoint", help="u-network checkpoint (default checkpoints/u_final.bin)")
    uq = sub.add_parser("uq", parents=[common], help="stochastic training and statistics")
    uq.add_argument("--stage", choices=("train", "stats", "all"), default="all")
    uq.add_argument("--checkpoint", help="u-network checkpoint for the stats stage")
    gc = sub.add_parser("grad-check", parents=[common], help="autodiff verification suite")
    gc.add_argument("--draws", type=int, default=20)
    gc.add_argument("--cases", type=int, default=100)
    return parser


def resolve_config(args) -> cfgmod.ExperimentConfig:
    """Config file plus command-line overrides.

    Changing --mode or --relax-type swaps in the default networks and weights
    for the new variant; training, sampling and output settings are kept.
    """
    if args.config is None:
        if args.command != "grad-check":
            raise CliError("--config is required")
        cfg = cfgmod.build("burgers-riemann")
    else:
        cfg = cfgmod.load(args.config)
    mode = args.mode or cfg.mode
    relax = args.relax_type if args.relax_type is not None else cfg.relax_type
    if mode != cfg.mode or relax != cfg.relax_type:
        fresh = cfgmod.build(cfg.problem, mode, None if mode == "pinn" else relax)
        cfg = replace(
            fresh,
            train=cfg.train,
            counts=cfg.counts,
            out=cfg.out,
            reference=cfg.reference,
            uq=cfg.uq,
        )
    train_kw = {}
    if args.seed is not None:
        train_kw["seed"] = args.seed
    if args.epochs is not None:
        train_kw["epochs"] = args.epochs
    if train_kw:
        cfg = replace(cfg, train=replace(cfg.train, **train_kw))
    if args.out is not None:
        cfg = replace(cfg, out=args.out)
    cfgmod.validate(cfg)
    return cfg


def cmd_train(cfg: cfgmod.ExperimentConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.cfg").write_text(cfgmod.serialize(cfg))
    problem = cfg.problem_spec()
    ckpt = out / "checkpoints"

    def progress(rec):
        if rec["epoch"] % 1000 == 0:
            log.info("epoch %d loss %s", rec["epoch"], format_number(rec["total"]))

    try:
        result = train(
            problem,
            cfg.u_sizes,
            cfg.v_sizes,
            cfg.weights,
            cfg.train,
            counts=cfg.counts,
            checkpoint_dir=ckpt,
            on_epoch=progress,
        )
    except TrainingDiverged as exc:
        write_history(exc.history, out / "history.jsonl")
        raise CliError(str(exc)) from exc
    write_history(result.history, out / "history.jsonl")
    result.points.to_csv(out / "points.csv")
    save_checkpoint(ckpt, result.u_params, result.v_params)
    if result.history:
        print(f"final loss {format_number(result.history[-1]['total'])}")
    print(f"wrote {out}")
    return 0


def _write_reference(ref: ReferenceField, problem, ref_dir: Path) -> None:
    kind = problem.kind
    ref_dir.mkdir(parents=True, exist_ok=True)
    header = ["t", "x_center"] + [f"q_{n}" for n in kind.conserved_names] + list(
        kind.primitive_names
    )
    for t, prim in zip(ref.times, ref.values):
        q = primitive_to_conserved(kind, prim, problem.gamma)
        with open(ref_dir / f"snapshot_t{t:.6f}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for x, qrow, prow in zip(ref.centers, q, prim):
                w.writerow([format_number(t), format_number(x)] + [format_number(v) for v in (*qrow, *prow)])


def _write_moments(path: Path, t: float, centers, mean, var, names) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x"] + [f"mean_{n}" for n in names] + [f"var_{n}" for n in names])
        for x, m, v in zip(centers, mean, var):
            w.writerow([format_number(t), format_number(x)] + [format_number(a) for a in (*m, *v)])


def _read_moments(path: Path, n: int):
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return float(rows[0, 0]), rows[:, 1], rows[:, 2 : 2 + n], rows[:, 2 + n : 2 + 2 * n]


def cmd_reference(cfg: cfgmod.ExperimentConfig) -> int:
    problem = cfg.problem_spec()
    ref_dir = Path(cfg.out) / "reference"
    times = cfg.output_times()
    r = cfg.reference
    if problem.stochastic is None:
        ref = reference_solution(problem, r.cells, r.refine, times, r.cfl)
        _write_reference(ref, problem, ref_dir)
    else:
        grid = Grid1D.for_problem(problem, cfg.uq.cells)
        means, variances = fv_reference_moments(
            problem, grid, times, cfg.uq.reference_samples, cfg.seed, r.cfl, cfg.uq.batch
        )
        ref_dir.mkdir(parents=True, exist_ok=True)
        for t, m, v in zip(times, means, variances):
            _write_moments(
                ref_dir / f"moments_t{t:.6f}.csv", t, grid.centers, m, v, problem.kind.primitive_names
            )
    print(f"wrote {ref_dir}")
    return 0


def _checkpoint(cfg, given: str | None) -> ParamSet:
    path = Path(given) if given else Path(cfg.out) / "checkpoints" / "u_final.bin"
    if not path.is_file():
        raise CliError(f"missing checkpoint: {path}")
    return ParamSet.load(path)


def cmd_evaluate(cfg: cfgmod.ExperimentConfig, checkpoint: str | None) -> int:
    problem = cfg.problem_spec()
    if problem.stochastic is not None:
        raise CliError("stochastic problems are evaluated with `uq --stage stats`")
    ref_dir = Path(cfg.out) / "reference"
    try:
        ref = load_reference(ref_dir, problem)
    except FileNotFoundError as exc:
        raise CliError(f"missing reference in {ref_dir}; run `reference` first") from exc
    report = evaluate(_checkpoint(cfg, checkpoint), problem, ref)
    write_report(report, problem, Path(cfg.out) / "eval")
    print(f"relative L2 {format_number(report.relative_l2)}")
    return 0


def cmd_uq(cfg: cfgmod.ExperimentConfig, stage: str, checkpoint: str | None) -> int:
    problem = cfg.problem_spec()
    if problem.stochastic is None:
        raise CliError(f"{cfg.problem} has no stochastic initial condition")
    if stage in ("train", "all"):
        cmd_train(cfg)
    if stage == "train":
        return 0
    params = _checkpoint(cfg, checkpoint)
    grid = Grid1D.for_problem(problem, cfg.uq.cells)
    times = cfg.output_times()
    names = problem.kind.primitive_names
    uq_dir = Path(cfg.out) / "uq"
    uq_dir.mkdir(parents=True, exist_ok=True)
    ref_dir = Path(cfg.out) / "reference"
    report = []
    for t in times:
        pts = np.column_stack([np.full(grid.n_cells, t), grid.centers])
        if cfg.uq.method == "quad":
            est = quad_mean_variance(
                params, pts, gauss_legendre(cfg.uq.quad_points), problem.stochastic_dim
            )
        else:
            est = mc_mean_variance(
                params, pts, uniform_sampler(problem.stochastic_dim), cfg.uq.mc_samples, cfg.seed
            )
        _write_moments(uq_dir / f"moments_t{t:.6f}.csv", t, grid.centers, est.mean, est.variance, names)
        ref_path = ref_dir / f"moments_t{t:.6f}.csv"
        if ref_path.is_file():
            _, _, rm, rv = _read_moments(ref_path, len(names))
            report.append((t, relative_l2(est.mean, rm), _safe_l2(est.variance, rv)))
    if report:
        with open(uq_dir / "uq_report.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "mean_relative_l2", "variance_relative_l2"])
            for row in report:
                w.writerow([format_number(v) for v in row])
    print(f"wrote {uq_dir}")
    return 0


def _safe_l2(pred, ref) -> float:
    # The variance vanishes identically at t = 0 away from the perturbed states.
    try:
        return relative_l2(pred, ref)
    except ValueError:
        return float("nan")


def cmd_grad_check(cfg: cfgmod.ExperimentConfig, draws: int, cases: int) -> int:
    results = run_all(cfg.seed, draws, cases)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "grad_check.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["check", "case", "relative_deviation", "tolerance", "passed"])
        for r in results:
            w.writerow([r.check, r.case, format_number(r.deviation), format_number(r.tolerance), int(r.passed)])
    failed = [r for r in results if not r.passed]
    worst = max(r.deviation for r in results)
    print(f"{len(results) - len(failed)}/{len(results)} checks passed, worst deviation {format_number(worst)}")
    return 1 if failed else 0


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        cfg = resolve_config(args)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "reference":
            return cmd_reference(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.checkpoint)
        if args.command == "uq":
            return cmd_uq(cfg, args.stage, args.checkpoint)
        return cmd_grad_check(cfg, args.draws, args.cases)
    except (CliError, cfgmod.ConfigError, FVError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

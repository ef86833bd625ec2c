"""Command-line entry point: ``ganleak {train,attack,suite,audit,report,samples}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import AuditConfig, ConfigError, ExperimentConfig, load_config, parse_config_text
from .io import ATTACK_COLUMNS, markdown_table, read_checkpoint, read_rows, write_rows
from .runner import (RESULT_COLUMNS, ResultsTable, RunRecord, aggregate, make_dataset, run_audit, run_experiment,
                     run_suite)

__all__ = ["AuditConfig", "ConfigError", "ExperimentConfig", "ResultsTable", "RunRecord", "aggregate", "load_config",
           "main", "make_dataset", "parse_config_text", "run_audit", "run_experiment", "run_suite"]


def _experiment_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--seed", type=int, action="append", help="run seed (repeatable; overrides 'seeds')")
    p.add_argument("--out", help="output directory (overrides 'out')")
    p.add_argument("--workers", type=int, help="parallel worker processes (overrides 'workers')")


def _load(args) -> ExperimentConfig:
    overrides = list(args.set)
    if args.seed:
        overrides.append("seeds=" + ",".join(map(str, args.seed)))
    if args.out:
        overrides.append(f"out={args.out}")
    if getattr(args, "workers", None):
        overrides.append(f"workers={args.workers}")
    return load_config(args.config, overrides)


def cmd_train(args) -> int:
    cfg = _load(args)
    out = Path(cfg.out)
    records = [run_experiment(cfg, seed, out) for seed in cfg.seeds]
    for rec in records:
        print(f"{rec.cell} seed={rec.seed} outcome={rec.outcome} iterations={rec.iterations} gap={rec.gap:.4f}"
              + (f" max|w|={rec.clip_max:.4g}" if rec.strategy == "clip" else "")
              + (f" ({rec.reason})" if rec.reason else ""))
    return 0


def cmd_attack(args) -> int:
    cfg = _load(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    records = [run_experiment(cfg, seed, out) for seed in cfg.seeds]
    rows = sorted((r for rec in records for r in rec.attack_rows()), key=lambda r: (r["mode"], r["seed"]))
    write_rows(out / "attacks.csv", ATTACK_COLUMNS, rows)
    print(markdown_table(ATTACK_COLUMNS, rows), end="")
    return 0


def cmd_suite(args) -> int:
    cfg = _load(args)
    table = run_suite(cfg, cfg.out)
    print(markdown_table(RESULT_COLUMNS, table.rows), end="")
    return 0


def cmd_audit(args) -> int:
    acfg = AuditConfig(epsilons=tuple(args.epsilon), mechanism=args.mechanism, m=args.m, n_runs=args.runs,
                       convergence=args.convergence, convergence_runs=args.convergence_runs, seed=args.seed,
                       out=args.out)
    report = run_audit(acfg, acfg.out)
    for chain in report.chains:
        print(chain.row())
    if report.convergence is not None:
        print(f"uniform convergence: eps={report.convergence.epsilon:.4g} "
              f"{'PASS' if report.convergence.passed else 'FAIL'}")
    return 0


def cmd_report(args) -> int:
    rows = read_rows(Path(args.dir) / "results.csv")
    print(markdown_table(RESULT_COLUMNS, rows), end="")
    return 0


def cmd_samples(args) -> int:
    from ..data.images import save_grid
    from ..engine import RngStream, load_state_dict
    from ..gan.models import Generator, NoisePrior
    from .runner import _as_images

    cfg = _load(args)
    _, tensors = read_checkpoint(args.checkpoint)
    ds = make_dataset(cfg, cfg.seeds[0])
    G = Generator(NoisePrior(cfg.noise_kind, cfg.noise_dim), ds.shape, cfg.g_hidden, np.random.default_rng(0))
    load_state_dict(G.parameters(), {k: v for k, v in tensors.items() if k.startswith("G.")})
    save_grid(args.output, _as_images(G.sample(args.n, RngStream(cfg.seeds[0], 4000).generator)))
    print(f"wrote {args.n} samples to {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ganleak", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_ in (("train", cmd_train, "train one cell and write checkpoints and loss curves"),
                            ("attack", cmd_attack, "train one cell and run the membership attacks"),
                            ("suite", cmd_suite, "run the strategy x objective grid and aggregate results")):
        p = sub.add_parser(name, help=help_)
        _experiment_args(p)
        p.set_defaults(func=fn)
    p = sub.add_parser("audit", help="verify the privacy -> stability -> generalization chain")
    p.add_argument("--epsilon", type=float, nargs="*", default=[0.1, 0.5, 1.0])
    p.add_argument("--mechanism", default="exponential", choices=("exponential", "argmax", "constant"))
    p.add_argument("--m", type=int, default=20)
    p.add_argument("--runs", type=int, default=200)
    p.add_argument("--convergence", action="store_true", help="also run the noisy-gradient uniform-convergence check")
    p.add_argument("--convergence-runs", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="audit")
    p.set_defaults(func=cmd_audit)
    p = sub.add_parser("report", help="print results.csv from a suite directory as markdown")
    p.add_argument("dir")
    p.set_defaults(func=cmd_report)
    p = sub.add_parser("samples", help="write a sample grid from a saved checkpoint")
    _experiment_args(p)
    p.add_argument("checkpoint")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--output", default="samples.ppm")
    p.set_defaults(func=cmd_samples)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"ganleak: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

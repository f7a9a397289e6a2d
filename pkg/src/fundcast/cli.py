"""Command-line entry point.

Subcommands: generate, train, eval, ushape. A JSON config file supplies
every setting with full defaults; flags override file values. Exit
codes: 0 success, 2 configuration error, 3 training divergence, 4 I/O
or shape error, 5 mode mismatch. Set FUNDCAST_LOG to control verbosity.
"""

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from . import config as cfgmod
from . import evaluation, generator, training
from .autodiff import ShapeError
from .config import ConfigError
from .env import load_dataset, save_dataset, write_progress_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_IO = 4
EXIT_MODE = 5

log = logging.getLogger("fundcast")


def _load_config(args):
    cfg = cfgmod.load_config(args.config) if args.config else cfgmod.RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
        cfg.generator.seed = args.seed
    if getattr(args, "mode", None) is not None:
        cfg.mode = args.mode
        if args.mode == "tc3" and getattr(args, "options", None) is None:
            cfg.options = 1
    if getattr(args, "options", None) is not None:
        cfg.options = args.options
    if getattr(args, "horizon", None):
        cfg.horizons = list(args.horizon)
        cfg.eval_horizon = cfg.horizons[0]
    return cfg.validate()


def cmd_generate(args):
    cfg = _load_config(args)
    campaigns = generator.generate_campaigns(cfg.generator)
    out = Path(args.out) if args.out else Path(cfg.paths.dataset)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(out, campaigns)
    write_progress_csv(out.with_suffix(".progress.csv"), campaigns)
    durations = np.array([c.duration for c in campaigns])
    shares = evaluation.increment_shares(campaigns)
    print(f"wrote {len(campaigns)} campaigns to {out}")
    lo, hi = durations.min(), durations.max()
    hist, edges = np.histogram(durations, bins=min(8, hi - lo + 1), range=(lo, hi + 1))
    print("duration histogram:")
    for count, left, right in zip(hist, edges[:-1], edges[1:]):
        print(f"  [{int(left):2d}, {int(right):2d}): {int(count)}")
    print("increment share per funding-cycle eighth:")
    print("  " + " ".join(f"{s:.3f}" for s in shares))
    return EXIT_OK


def cmd_train(args):
    cfg = _load_config(args)
    dataset_path = args.dataset or cfg.paths.dataset
    campaigns, _ = load_dataset(dataset_path)
    resume_state = None
    if args.resume:
        nets, mode, resume_state = ckpt.load_checkpoint(args.resume)
        if mode != cfg.mode:
            raise ConfigError(f"checkpoint mode {mode!r} != configured mode {cfg.mode!r}")
    out_dir = Path(args.out) if args.out else Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)
    trainer = training.Trainer(campaigns, cfg, resume_state=resume_state)
    if args.resume:
        trainer.nets.parameters().load_arrays(
            [(n, t.data.shape, t.data.ravel().tolist()) for n, t in nets.parameters().items()]
        )
        trainer.nets.target_parameters().load_arrays(
            [
                (n, t.data.shape, t.data.ravel().tolist())
                for n, t in nets.target_parameters().items()
            ]
        )

    def progress(row):
        log.info(
            "epoch %d: critic %.5f actor %.5f eval_mape %.2f",
            row["epoch"],
            row["critic_loss"],
            row["actor_loss"],
            row["eval_mape"],
        )

    rows = trainer.run(progress=progress)
    ckpt_path = out_dir / Path(cfg.paths.checkpoint).name
    log_path = out_dir / Path(cfg.paths.train_log).name
    ckpt.save_checkpoint(ckpt_path, trainer.nets, cfg.mode, trainer.training_state())
    training.write_log_csv(log_path, rows)
    print(f"checkpoint: {ckpt_path}")
    print(f"training log: {log_path}")
    if rows:
        last = rows[-1]
        print(
            f"held-out ({len(trainer.test_set)} campaigns, horizon {cfg.eval_horizon}): "
            f"MAE {last['eval_mae']:.4f}  RMSE {last['eval_rmse']:.4f}  "
            f"MAPE {last['eval_mape']:.2f}%"
        )
    return EXIT_OK


def cmd_eval(args):
    campaigns, _ = load_dataset(args.dataset)
    nets, _, _ = ckpt.load_checkpoint(args.checkpoint)
    horizons = list(args.horizon) if args.horizon else [6, 7, 8, 9, 10]
    out_dir = Path(args.out) if args.out else Path("reports")
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = []
    for h in horizons:
        report = evaluation.evaluate(campaigns, nets, h)
        report.write_json(out_dir / f"eval_h{h}.json")
        report.write_csv(out_dir / f"eval_h{h}.csv")
        reports.append(report)
    header = "metric " + " ".join(f"{f'{r.horizon}-day':>10}" for r in reports)
    print(header)
    print("MAE    " + " ".join(f"{r.mae:>10.4f}" for r in reports))
    print("RMSE   " + " ".join(f"{r.rmse:>10.4f}" for r in reports))
    print("MAPE   " + " ".join(f"{r.mape:>9.2f}%" for r in reports))
    print(f"reports written to {out_dir}")
    return EXIT_OK


def cmd_ushape(args):
    campaigns, _ = load_dataset(args.dataset)
    nets, _, _ = ckpt.load_checkpoint(args.checkpoint)
    if nets.K < 2:
        print(
            "error: bucket analysis needs a checkpoint with at least 2 options "
            f"(this one has {nets.K}); train with --mode options --options 2",
            file=sys.stderr,
        )
        return EXIT_MODE
    report = evaluation.ushape_analysis(campaigns, nets)
    out_dir = Path(args.out) if args.out else Path("reports")
    out_dir.mkdir(parents=True, exist_ok=True)
    report.write_json(out_dir / "ushape.json")
    report.write_csv(out_dir / "ushape.csv")
    print("bucket  " + "  ".join(f"beta{k}" for k in range(nets.K)) + "  out_diff  share")
    for b in range(evaluation.N_BUCKETS):
        betas = "  ".join(f"{report.beta_means[b, k]:.3f}" for k in range(nets.K))
        print(f"{b + 1:>6}  {betas}  {report.output_diff[b]:>8.4f}  {report.shares[b]:.3f}")
    print(f"reports written to {out_dir}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fundcast",
        description="Generate synthetic campaigns, train the forecaster, and evaluate it.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (defaults used when omitted)")
        p.add_argument("--seed", type=int, help="override the root seed")
        p.add_argument("--mode", choices=["tc3", "options"], help="training mode")
        p.add_argument("--options", type=int, help="number of options (sub-policies)")
        p.add_argument("--horizon", type=int, nargs="+", help="forecast horizons in days")
        p.add_argument("--out", help="output directory or file")

    p_gen = sub.add_parser("generate", help="write a synthetic campaign dataset")
    common(p_gen)
    p_gen.set_defaults(func=cmd_generate)

    p_train = sub.add_parser("train", help="train on a dataset and write a checkpoint")
    common(p_train)
    p_train.add_argument("--dataset", help="dataset path (overrides config)")
    p_train.add_argument("--resume", help="checkpoint to continue from")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="score a checkpoint on a dataset")
    common(p_eval)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--dataset", required=True)
    p_eval.set_defaults(func=cmd_eval)

    p_ushape = sub.add_parser("ushape", help="funding-cycle bucket analysis")
    common(p_ushape)
    p_ushape.add_argument("--checkpoint", required=True)
    p_ushape.add_argument("--dataset", required=True)
    p_ushape.set_defaults(func=cmd_ushape)
    return parser


def main(argv=None):
    level = os.environ.get("FUNDCAST_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except training.DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (OSError, ShapeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()

"""Command-line entry point: ``hapsv2x {train,eval,sweep,show-config}``.

Settings resolve as built-in defaults < ``--config`` file < command-line flags.
Exit status: 0 on success, 1 on runtime or configuration errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .drl import Algorithm
from .experiments import (DEFAULT_GAPS_M, ConfigError, RunConfig, desk_config, evaluate_checkpoint,
                          final_phase_mean, format_config, gap_sweep, load_config, run_experiment,
                          write_log_csv)

ALGO_CHOICES = {"ddpg": Algorithm.DDPG, "fd-maddpg": Algorithm.FD_MADDPG,
                "random": Algorithm.RANDOM, "greedy": Algorithm.GREEDY_V2H}


def _gap_list(text: str) -> list[float]:
    try:
        gaps = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed gap list {text!r}") from None
    if not gaps or any(g < 0 for g in gaps):
        raise argparse.ArgumentTypeError(f"gaps must be a non-empty list of values >= 0: {text!r}")
    return gaps


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", type=Path, help="key = value config file")
    shared.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    shared.add_argument("--seed", type=int, action="append", dest="seeds",
                        help="random seed (repeatable)")
    shared.add_argument("--algo", choices=sorted(ALGO_CHOICES), action="append", dest="algos",
                        help="algorithm (repeatable for sweep)")
    shared.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="hapsv2x", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hapsv2x {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    sub.add_parser("train", parents=[shared], help="train agents or roll out a baseline")
    ev = sub.add_parser("eval", parents=[shared], help="evaluate saved actors without noise")
    ev.add_argument("--checkpoint", type=Path, required=True, help="checkpoint directory")
    ev.add_argument("--episodes", type=_positive_int, default=10)
    sw = sub.add_parser("sweep", parents=[shared], help="inter-platoon gap sweep")
    sw.add_argument("--gaps", type=_gap_list, default=list(DEFAULT_GAPS_M),
                    help="comma-separated gaps in meters")
    sub.add_parser("show-config", parents=[shared], help="print the fully resolved config")
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    args = build_parser().parse_args(argv)
    if args.command in ("train", "eval") and args.algos and len(args.algos) > 1:
        build_parser().error(f"{args.command} takes a single --algo")
    return args


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else desk_config()
    changes = {}
    if args.seeds:
        changes["seeds"] = tuple(args.seeds)
    if args.algos:
        changes["algorithm"] = ALGO_CHOICES[args.algos[0]]
    return cfg.replace(**changes) if changes else cfg


def _write_resolved(cfg: RunConfig, out: Path, args: argparse.Namespace) -> None:
    out.mkdir(parents=True, exist_ok=True)
    header = [f"hapsv2x {__version__}", f"command: {args.command}"]
    if getattr(args, "checkpoint", None):
        header.append(f"checkpoint: {args.checkpoint}")
    if getattr(args, "gaps", None):
        header.append("gaps: " + ", ".join(repr(g) for g in args.gaps))
    if args.algos:
        header.append("algorithms: " + ", ".join(args.algos))
    (out / "resolved.cfg").write_text(format_config(cfg, header))


def main(args: argparse.Namespace) -> int:
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "show-config":
            sys.stdout.write(format_config(cfg, [f"hapsv2x {__version__}"]))
            return 0
        out = args.out
        _write_resolved(cfg, out, args)
        if args.command == "train":
            res = run_experiment(cfg, out)
            print(f"{cfg.algorithm.value}: final median AoI {res.aoi_ms_median:.4f} ms, "
                  f"final median reward {res.reward_median:.4f} ({len(cfg.seeds)} seeds) -> {out}")
        elif args.command == "eval":
            aois, rewards = [], []
            for s in cfg.seeds:
                lg = evaluate_checkpoint(args.checkpoint, cfg.env, args.episodes, s)
                write_log_csv(lg, out / f"eval_seed_{s}.csv")
                aois.append(final_phase_mean(lg.aoi_ms_mean, 1.0))
                rewards.append(final_phase_mean(lg.reward_mean, 1.0))
            print(f"eval: final median AoI {np.median(aois):.4f} ms, "
                  f"final median reward {np.median(rewards):.4f} -> {out}")
        elif args.command == "sweep":
            algos = [ALGO_CHOICES[a] for a in args.algos] if args.algos else [cfg.algorithm]
            rows, _ = gap_sweep(cfg, args.gaps, algos, out)
            for gap, algo, aoi, _iqr, reward in rows:
                print(f"gap {gap:g} m {algo}: final median AoI {aoi:.4f} ms, "
                      f"final median reward {reward:.4f}")
            print(f"sweep table -> {out / 'sweep.csv'}")
        return 0
    except (ConfigError, ValueError, OSError, FloatingPointError) as exc:
        print(f"hapsv2x: error: {exc}", file=sys.stderr)
        return 1


def run(argv=None) -> None:
    sys.exit(main(parse_args(argv)))


if __name__ == "__main__":
    run()

# semicon/cli.py
# Command-line surface.
#   generate --config PATH --out data.npz
#   train    --config PATH --seed N --out model.smck
#   encode   --model PATH [--data PATH] [--split database|query] [--maps DIR] --out index.smcn
#   search   --index PATH --query-index PATH --topk K
#   eval     --index PATH --queries PATH [--report PATH]
#   ablate   --config PATH --seeds 0,1,2
# Exit status: 0 ok, 2 for malformed files / configuration, 1 for anything else.

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

from semicon.controllers.job_controller import JobController, mean_scores
from semicon.errors import ConfigError, FileFormatError
from semicon.models.config_io import load_config
from semicon.models.enums import Split
from semicon.models.settings import RunConfig
from semicon.utils.logging_utils import build_logger


def _config(path: Optional[str]) -> RunConfig:
    return load_config(path) if path else RunConfig()


def _seeds(raw: str) -> List[int]:
    try:
        return [int(s) for s in raw.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"--seeds expects comma-separated integers, got {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="semicon", description="Fine-grained hashing: train, encode, search, evaluate.")
    ap.add_argument("--log-dir", help="Also write a rotating log file here")
    ap.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="Write the synthetic dataset")
    p.add_argument("--config")
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="Train a model and write its checkpoint")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("encode", help="Encode a data split into a packed index")
    p.add_argument("--model", required=True)
    p.add_argument("--data", help="Dataset .npz (default: regenerate from the model's config)")
    p.add_argument("--split", choices=[s.value for s in Split], default=Split.DATABASE.value)
    p.add_argument("--maps", help="Directory for the first sample's attention maps")
    p.add_argument("--out", required=True)

    p = sub.add_parser("search", help="Rank database codes for every query code")
    p.add_argument("--index", required=True)
    p.add_argument("--query-index", required=True)
    p.add_argument("--topk", type=int, required=True)

    p = sub.add_parser("eval", help="Mean average precision of queries against an index")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--report", help="Write the report here (default: <queries>.report.txt)")

    p = sub.add_parser("ablate", help="Train and evaluate every variant over several seeds")
    p.add_argument("--config")
    p.add_argument("--seeds", default="0,1,2")
    return ap


def _dispatch(args: argparse.Namespace, jobs: JobController, out) -> None:
    if args.command == "generate":
        jobs.generate(_config(args.config), args.out)
    elif args.command == "train":
        cfg = _config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        jobs.train(cfg, args.out)
    elif args.command == "encode":
        jobs.encode(args.model, args.out, args.data, Split(args.split), args.maps)
    elif args.command == "search":
        for q, ranking in enumerate(jobs.search(args.index, args.query_index, args.topk)):
            hits = " ".join(f"{i}:{d}" for i, d in zip(ranking.indices.tolist(), ranking.distances.tolist()))
            print(f"{q}\t{hits}", file=out)
    elif args.command == "eval":
        report_path = args.report or Path(args.queries).with_suffix(".report.txt")
        report = jobs.evaluate(args.index, args.queries, report_path)
        print(f"mAP {report.map:.4f}", file=out)
    elif args.command == "ablate":
        means = mean_scores(jobs.ablate(_config(args.config), _seeds(args.seeds)))
        for variant, score in means.items():
            print(f"{variant.value}\t{score:.4f}", file=out)


def run_command(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logger = build_logger("semicon", Path(args.log_dir) if args.log_dir else None,
                          logging.DEBUG if args.verbose else logging.INFO)
    try:
        _dispatch(args, JobController(logger), out)
    except (FileFormatError, ConfigError) as exc:
        logger.error("%s: %s", args.command, exc)
        return 2
    except Exception as exc:
        logger.error("%s failed: %s", args.command, exc, exc_info=args.verbose)
        return 1
    return 0


def main() -> None:
    sys.exit(run_command())

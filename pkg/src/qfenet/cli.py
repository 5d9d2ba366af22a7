"""Command line entry point: ``qfenet {train,evaluate,sweep}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .circuits import PRESETS
from .config import RunConfig, apply_overrides, load_config


def _parser():
    parser = argparse.ArgumentParser(prog="qfenet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("train", "evaluate", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="key = value config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--data-dir")
        p.add_argument("--out-dir")
        p.add_argument("--workers", type=int)
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key, e.g. ansatz.layers=2")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "evaluate":
            p.add_argument("--checkpoint", help="defaults to <out-dir>/checkpoint.qfe")
        if name == "sweep":
            p.add_argument("--presets", default=",".join(PRESETS))
            p.add_argument("--depths", default="1-5", help="inclusive range, e.g. 1-5")
    return parser


def _resolve(args) -> RunConfig:
    overrides = []
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        overrides.append((key, value))
    for flag, key in (("seed", "train.seed"), ("data_dir", "data.dir"),
                      ("out_dir", "out.dir"), ("workers", "train.workers")):
        value = getattr(args, flag)
        if value is not None:
            overrides.append((key, str(value)))
    cfg = load_config(args.config)
    return apply_overrides(cfg, overrides).validate()


def _depths(text):
    lo, _, hi = text.partition("-")
    return range(int(lo), int(hi or lo) + 1)


def run(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    from . import trainer

    cfg = _resolve(args)
    if args.command == "train":
        result = trainer.train(cfg, log_every=1 if args.verbose else None)
        final = result.records[-1]
        print(json.dumps({"status": "ok", "checkpoint": result.checkpoint,
                          "metrics": os.path.join(cfg.out_dir, "metrics.csv"),
                          "test_accuracy": final.accuracy, "test_cost": final.cost}))
    elif args.command == "evaluate":
        ckpt = args.checkpoint or os.path.join(cfg.out_dir, "checkpoint.qfe")
        model, _ = trainer.model_from_checkpoint(ckpt)
        _, test = trainer.load_datasets(cfg)
        cost, acc, confusion = trainer.evaluate(model, test, cfg.train_workers)
        print(json.dumps({"status": "ok", "cost": cost, "accuracy": acc,
                          "confusion": confusion.tolist()}))
    else:
        presets = tuple(p.strip() for p in args.presets.split(",") if p.strip())
        paths = trainer.sweep(cfg, presets, _depths(args.depths))
        print(json.dumps({"status": "ok", "metrics": paths,
                          "summary": os.path.join(cfg.out_dir, "summary.csv")}))
    return 0


def main(argv=None):
    try:
        return run(argv)
    except SystemExit:
        raise
    except Exception as exc:  # reported as one machine-readable line
        print(json.dumps({"status": "error", "type": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

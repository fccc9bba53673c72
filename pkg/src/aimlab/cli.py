"""Command line entry point: ``aimlab simulate | train-gan | train-detector | evaluate | report``.

Exit codes: 0 success, 2 usage error, 3 config error, 4 missing or stale artifact,
5 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from . import pipeline as pl
from .config import SCENARIOS, ConfigError, load_config

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_MISSING = 4
EXIT_RUNTIME = 5


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML run config (defaults are used for missing keys)")
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--out", default=".", help="workspace root; data/model/report paths are relative to it")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config value, e.g. --set gan.epochs=20 (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aimlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate episode datasets")
    p.add_argument("--stage", choices=("base", "gan", "all"), default="base",
                   help="base: human groups, human, light, strong; gan: GAN collection and the "
                        "performance episodes (needs trained GANs)")
    _common(p)

    p = sub.add_parser("train-gan", help="train the GAN aimbot of one player group")
    p.add_argument("--group", choices=("1", "2", "all"), default="all")
    _common(p)

    p = sub.add_parser("train-detector", help="train the detectors a scenario needs")
    p.add_argument("--scenario", choices=SCENARIOS + ("all",), default="all")
    _common(p)

    p = sub.add_parser("evaluate", help="score every scenario and write the reports")
    _common(p)

    p = sub.add_parser("report", help="validate report.json and print its summary tables")
    p.add_argument("--json", action="store_true", help="print the JSON report instead of the tables")
    _common(p)

    p = sub.add_parser("pipeline", help="run every stage in order")
    _common(p)
    return parser


def _log(msg: str) -> None:
    print(msg, flush=True)


def run(args) -> int:
    cfg = load_config(args.config, args.overrides, args.seed)
    ws = pl.Workspace(cfg, args.out)
    t0 = time.perf_counter()
    cmd = args.command
    if cmd in ("simulate", "pipeline"):
        stage = getattr(args, "stage", "all")
        if cmd == "pipeline" or stage in ("base", "all"):
            pl.simulate_base(ws, _log)
    if cmd in ("train-gan", "pipeline"):
        groups = pl.GAN_GROUPS if getattr(args, "group", "all") == "all" else (int(args.group),)
        for g in groups:
            pl.train_gan_group(ws, g, _log)
    if cmd == "pipeline" or (cmd == "simulate" and args.stage in ("gan", "all")):
        pl.simulate_gan(ws, _log)
    if cmd in ("train-detector", "pipeline"):
        wanted = cfg["scenarios"] if getattr(args, "scenario", "all") == "all" else [args.scenario]
        for name in pl.detectors_for(wanted):
            pl.train_detector_named(ws, name, _log)
    if cmd in ("evaluate", "pipeline"):
        from .report import evaluate

        evaluate(ws, _log)
    if cmd == "report":
        from .report import render_text, validate_report

        path = ws.reports / "report.json"
        if not path.exists():
            raise pl.MissingArtifact(f"{path} is missing", "aimlab evaluate")
        report = json.loads(path.read_text())
        validate_report(report)
        if report["config_hash"] != ws.hash:
            raise pl.MissingArtifact(f"{path} was produced from a different config", "aimlab evaluate")
        print(json.dumps(report, indent=1, sort_keys=True) if args.json else render_text(report), end="")
    print(f"[{cmd}] done in {time.perf_counter() - t0:.1f}s", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except pl.MissingArtifact as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except OSError as exc:
        print(f"io error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (pl.LeakageError, FloatingPointError, ValueError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

"""Command line: ``ricciforms run|validate|scenarios``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ConfigError, ConfigReadError, load_config
from .experiment import EXIT_CONFIG, EXIT_IO, EXIT_OK, OutputError, check_semantics, run_experiment
from .scenarios import CATALOG, FORM_KEYS


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ricciforms", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override run.seed")
    common.add_argument("--out-dir", default=None, help="override output.dir")
    common.add_argument("--quiet", action="store_true", help="only print errors")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="run an experiment")
    run.add_argument("config")
    val = sub.add_parser("validate", parents=[common], help="check a config without running it")
    val.add_argument("config")
    sub.add_parser("scenarios", parents=[common], help="list initial metrics and forms")
    return ap


def _load(path: str, args):
    return load_config(path).with_overrides(seed=args.seed, out_dir=args.out_dir)


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr
    )
    say = (lambda *a: None) if args.quiet else print

    if args.command == "scenarios":
        for s in CATALOG.values():
            say(f"{s.name:28s} params={json.dumps(s.parameters)}  valid: {s.valid_range}")
        for kind, keys in FORM_KEYS.items():
            say(f"form:{kind:23s} params={sorted(keys)}")
        return EXIT_OK

    try:
        cfg = _load(args.config, args)
        check_semantics(cfg)
    except ConfigReadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate":
        say(f"ok: {args.config}")
        return EXIT_OK

    try:
        outcome = run_experiment(cfg)
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    s = outcome.summary
    say(f"{s['status']}: {s['steps']} steps to t={s['t_final']:.6g}, {s['rows']} rows")
    for claim, v in s["verdicts"].items():
        say(f"  {claim:10s} {'holds' if v['holds'] else 'VIOLATED'}  worst={v['worst_violation']:.3e} tol={v['tolerance']:.3e}")
    say(f"wrote {outcome.csv_path} and {outcome.summary_path}")
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())

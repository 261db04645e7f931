"""Command-line interface: run, sweep, and search subcommands."""

from __future__ import annotations

import argparse
import json
import sys

from . import harness
from .engine import ConfigurationError
from .scenario import PROFILES, override_field

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixsim",
        description="Discrete-event mix network simulator: anonymity, latency, overhead.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "execute one scenario over its seed list"),
                            ("sweep", "run the cartesian product of an axis and seeds"),
                            ("search", "bisect one knob until a target entropy is met")):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("-c", "--config", required=True, help="JSON config file")
        cmd.add_argument("-o", "--output", required=True, help="CSV output path")
        cmd.add_argument("--seed-override", default=None,
                         help="comma-separated seeds replacing the configured list")
        cmd.add_argument("--parallel", type=int, default=1, metavar="N",
                         help="run up to N independent simulations concurrently")
        cmd.add_argument("--profile", choices=sorted(PROFILES), default="desk",
                         help="default scale for capacity/batch/delay/rate")
    return parser


def _load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError("config", f"no such file: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigurationError("config", f"invalid JSON: {exc}")


def _parse_seed_override(text: str) -> list:
    try:
        seeds = [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise ConfigurationError("--seed-override", f"expected comma-separated integers: {text!r}")
    if not seeds:
        raise ConfigurationError("--seed-override", "no seeds given")
    return seeds


def _apply_seed_override(raw: dict, args, nested: bool) -> dict:
    if args.seed_override is None:
        return raw
    seeds = _parse_seed_override(args.seed_override)
    path = "base.run.seeds" if nested else "run.seeds"
    return override_field(raw, path, seeds)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        raw = _load_json(args.config)
        if args.command == "run":
            raw = _apply_seed_override(raw, args, nested=False)
            outcome = harness.run_scenario(raw, args.profile, args.parallel)
            harness.print_failures(outcome)
            harness.write_csv(outcome.rows, args.output)
            if not outcome.rows:
                print("error: every run failed", file=sys.stderr)
                return EXIT_RUNTIME
        elif args.command == "sweep":
            raw = _apply_seed_override(raw, args, nested=True)
            outcome = harness.sweep(raw, args.profile, args.parallel)
            harness.print_failures(outcome)
            harness.write_csv(outcome.rows, args.output)
            if not outcome.rows:
                print("error: every sweep point failed", file=sys.stderr)
                return EXIT_RUNTIME
        else:
            raw = _apply_seed_override(raw, args, nested=True)
            result = harness.search(raw, args.profile, args.parallel, log=sys.stderr)
            harness.write_csv([result.row()], args.output)
            print(json.dumps({
                "knob": result.knob,
                "knob_value": result.knob_value,
                "entropy_bits_mean": result.entropy_mean,
                "entropy_bits_ci95": result.entropy_ci95,
                "objective_bits": result.objective_bits,
                "iterations": result.iterations,
            }))
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:   # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

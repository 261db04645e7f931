"""mixsim-plot: render mixsim result CSVs into PNG/SVG figures."""

from __future__ import annotations

import argparse
import json
import sys

from .figures import FigureError, dump_to_file, parse_spec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mixsim-plot",
        description="Render figures (PNG and SVG) from mixsim CSV results.")
    parser.add_argument("-c", "--config", required=True, help="figure spec JSON file")
    parser.add_argument("--dump-data", metavar="PATH", default=None,
                        help="also write the plotted point set as JSON")
    args = parser.parse_args(argv)

    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        print(f"error: no such file: {args.config}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON in {args.config}: {exc}", file=sys.stderr)
        return 1

    try:
        spec = parse_spec(raw)
        dump = render(spec)
    except FigureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if args.dump_data:
        dump_to_file(dump, args.dump_data)
    for path in dump["outputs"]:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())

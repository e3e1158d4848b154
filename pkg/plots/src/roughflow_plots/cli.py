"""`plots render <spec.json>`: one figure per invocation."""

from __future__ import annotations

import argparse
import sys

from .render import FigureSpec, SchemaError, render


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="plots", description="render roughflow report figures")
    sub = p.add_subparsers(dest="command", required=True)
    rp = sub.add_parser("render", help="render a figure from a spec file")
    rp.add_argument("spec", help="FigureSpec JSON file")
    try:
        args = p.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        out = render(FigureSpec.from_json(args.spec))
    except SchemaError as e:
        print(f"schema error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())

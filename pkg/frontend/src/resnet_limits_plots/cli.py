"""Command-line entry point: render one figure from experiment artifacts."""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_IDS, FigureSpec, render
from .io import SchemaError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="resnet-limits-plot",
        description="Render figures from resnet-limits CSV/JSON outputs.",
    )
    parser.add_argument("figure_id", choices=list(FIGURE_IDS))
    parser.add_argument("inputs", nargs="+", help="artifact files for this figure")
    parser.add_argument("--out", required=True, help="image path (.png or .svg)")
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec(
            figure_id=args.figure_id,
            input_paths=tuple(args.inputs),
            output_path=args.out,
        )
        render(spec)
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

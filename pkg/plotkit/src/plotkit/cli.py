"""Batch entry point: render one run directory to one image file."""

from __future__ import annotations

import argparse
import json
import sys

from .bundle import BundleError, FigureBundle
from .render import render_three_panel


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plotkit",
        description="Render the three-panel figure (field, spectrogram, "
                    "populations) for one isomctl run directory.")
    parser.add_argument("run_dir", help="directory containing the run CSVs "
                                        "and manifest.json")
    parser.add_argument("output", help="output image path (.png, .pdf, ...)")
    parser.add_argument("--style", default=None,
                        help="JSON file overriding style defaults")
    args = parser.parse_args(argv if argv is not None else sys.argv[1:])

    style = {}
    if args.style is not None:
        try:
            with open(args.style) as fh:
                style = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"cannot read style file: {exc}", file=sys.stderr)
            return 2

    bundle = FigureBundle.from_directory(args.run_dir, args.output,
                                         style=style)
    try:
        path = render_three_panel(bundle)
    except BundleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""featreg-export CLI: export-weights and export-descriptors subcommands."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import ExporterError
from .export import export_descriptors, export_weights


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="featreg-export",
        description="Convert torch CNN weights into featreg config/blob/KPD1 files",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export-weights", help="emit network config + weights blob")
    p.add_argument("--model", required=True)
    p.add_argument("--tap", required=True)
    p.add_argument("--out-config", required=True, type=Path)
    p.add_argument("--out-blob", required=True, type=Path)
    p.add_argument("--out-manifest", type=Path, default=None)
    p.add_argument("--weights", default=None, help="local state-dict file (.pth)")
    p.add_argument("--seed", type=int, default=0, help="init seed when no weights file")

    p = sub.add_parser("export-descriptors", help="emit KPD1 reference descriptors")
    p.add_argument("--model", required=True)
    p.add_argument("--tap", required=True)
    p.add_argument("--images", required=True, type=Path)
    p.add_argument("--keypoints", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--window", type=int, default=64)
    p.add_argument("--base-sigma", type=float, default=1.6)
    p.add_argument("--weights", default=None)
    p.add_argument("--seed", type=int, default=0)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "export-weights":
            manifest = export_weights(
                args.model, args.tap, args.out_config, args.out_blob,
                args.out_manifest, args.weights, args.seed,
            )
            print(json.dumps(manifest, indent=2))
        else:
            written = export_descriptors(
                args.model, args.tap, args.images, args.keypoints, args.out,
                args.window, args.base_sigma, args.weights, args.seed,
            )
            for path in written:
                print(path)
        return 0
    except ExporterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

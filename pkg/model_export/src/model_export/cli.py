"""Command-line entry point: model-export export --checkpoint ... --out ... --size WxH"""

from __future__ import annotations

import argparse
import sys

from .export import ExportError, export


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(p) for p in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 512x512, got {text!r}")
    return (w, h)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="model-export")
    sub = parser.add_subparsers(dest="command", required=True)
    exp = sub.add_parser("export", help="convert a checkpoint to the exchange format")
    exp.add_argument("--checkpoint", required=True)
    exp.add_argument("--out", required=True)
    exp.add_argument("--size", required=True, type=_parse_size, metavar="WxH")
    exp.add_argument("--arch", default=None,
                     help="architecture builder for bare state_dicts (deeplabv3_resnet50)")
    exp.add_argument("--num-classes", type=int, default=None)
    exp.add_argument("--billboard-class", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manifest = export(
            checkpoint_path=args.checkpoint,
            out_path=args.out,
            input_size=args.size,
            arch=args.arch,
            num_classes=args.num_classes,
            billboard_class=args.billboard_class,
        )
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"exported {manifest.exported_path} "
          f"(channels={manifest.channels}, parity={manifest.parity:.2e})")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""featexport command line.

  featexport features --manifest m.json
  featexport records  --manifest m.json --slots K --classes M [--seed S]

The records command uses the built-in toy logits source; plugging a real
model in happens through the library API (export_records takes any
callable). Exit codes: 0 success, 2 usage, 3 bad manifest/data/backbone.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from .backbones import BackboneError
from .export import export_features, export_records, toy_logits_source
from .manifest import ManifestError, load_manifest


def _cmd_features(args) -> int:
    manifest = load_manifest(args.manifest)
    exported = export_features(manifest)
    print(
        f"exported {len(exported)} of {len(manifest.images)} images "
        f"-> {manifest.features_path}"
    )
    return 0


def _cmd_records(args) -> int:
    manifest = load_manifest(args.manifest)
    source = toy_logits_source(args.slots, args.classes, seed=args.seed)
    exported = export_records(manifest, source)
    print(
        f"wrote {len(exported)} records "
        f"({args.slots} slots x {args.classes} classes) "
        f"-> {manifest.records_path}"
    )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="featexport",
        description="Export feature files and slot-logit records.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="export backbone feature maps")
    p.add_argument("--manifest", required=True, help="manifest JSON path")
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("records", help="export toy slot-logit records")
    p.add_argument("--manifest", required=True, help="manifest JSON path")
    p.add_argument("--slots", type=int, required=True, help="slots per record")
    p.add_argument("--classes", type=int, required=True, help="class count")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_records)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    try:
        return args.func(args)
    except (ManifestError, BackboneError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

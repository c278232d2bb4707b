"""Command-line entry point; flags mirror SidecarConfig one for one."""

from __future__ import annotations

import argparse
import sys

from . import SidecarConfig, serve
from .model import MODEL_IDS


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="detector-sidecar",
        description="Serve object detections over newline-delimited JSON (stdio or TCP).",
    )
    parser.add_argument(
        "--model", default="blob-v1",
        help=f"model identifier (available: {', '.join(MODEL_IDS)}); default %(default)s",
    )
    parser.add_argument(
        "--class-filter", default="person",
        help="only emit detections with this label; default %(default)s",
    )
    parser.add_argument(
        "--score-floor", type=float, default=0.0,
        help="drop detections scoring below this; default %(default)s",
    )
    parser.add_argument(
        "--transport", default="stdio",
        help="'stdio' or 'tcp:<port>' (port 0 picks a free one); default %(default)s",
    )
    args = parser.parse_args(argv)
    if args.model not in MODEL_IDS:
        parser.error(f"unknown model {args.model!r} (available: {', '.join(MODEL_IDS)})")
    try:
        config = SidecarConfig(
            model_id=args.model,
            class_filter=args.class_filter,
            score_floor=args.score_floor,
            transport=args.transport,
        )
    except ValueError as exc:
        parser.error(str(exc))
    try:
        serve(config)
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())

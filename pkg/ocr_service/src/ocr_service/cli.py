"""Command line entry point: serve the recognizer, or digest image files.

The digest subcommand prints the same content digest the service computes
for an upload, which is how fixture tables are built from a crop directory.
"""

from __future__ import annotations

import argparse
import logging
import sys

import uvicorn

from . import __version__
from .app import create_app
from .config import ServiceConfig
from .errors import ServiceError
from .recognizer import digest_file

log = logging.getLogger(__name__)


def cmd_serve(args: argparse.Namespace) -> int:
    cfg = ServiceConfig(
        host=args.host,
        port=args.port,
        mode=args.mode,
        table=args.table,
        model_id=args.model_id,
        log_level=args.log_level,
    )
    app = create_app(cfg)
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level=cfg.log_level.lower())
    return 0


def cmd_digest(args: argparse.Namespace) -> int:
    failed = 0
    for path in args.files:
        try:
            print(f"{digest_file(path)}  {path}")
        except (ServiceError, OSError) as e:
            log.error("%s: %s", path, e)
            failed += 1
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ocr-service",
        description="HTTP recognizer for word crops with a deterministic fixture mode",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the transcription service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--mode", choices=["fixture", "model"], default="fixture")
    p.add_argument("--table", default="", help="fixture table JSONL (digest, text, confidence)")
    p.add_argument("--model-id", dest="model_id", default="", help="checkpoint for model mode")
    p.add_argument("--log-level", dest="log_level", default="INFO")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("digest", help="print the content digest of PNG files")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_digest)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, getattr(args, "log_level", "INFO").upper(), logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ServiceError as e:
        log.error("%s", e)
        return 1
    except OSError as e:
        log.error("%s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())

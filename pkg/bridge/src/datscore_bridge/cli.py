"""Command-line entry points.

    datscore-bridge serve --model <path-or-id> [--host --port --device
        --max-batch --queue-size --max-new-tokens]
    datscore-bridge export-traces --model <path-or-id> --dataset <file>
        --out <file> [--mode mt8|ref4 --device --max-batch]

Exit codes: 0 ok, 1 export finished with gaps, 2 input/usage error.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from .config import BridgeConfig
from .errors import BridgeError
from .export import MODE_DIRECTIONS, export_traces
from .model import BridgeModel


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="datscore-bridge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP scoring/translation service")
    serve.add_argument("--model", required=True, help="checkpoint path or hub identifier")
    serve.add_argument("--device", default="cpu")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--max-batch", type=int, default=8)
    serve.add_argument("--queue-size", type=int, default=64)
    serve.add_argument("--max-new-tokens", type=int, default=128)

    export = sub.add_parser("export-traces", help="write forced-decoding traces for a dataset")
    export.add_argument("--model", required=True, help="checkpoint path or hub identifier")
    export.add_argument("--device", default="cpu")
    export.add_argument("--dataset", required=True, help="JSON Lines dataset (augmented for mt8)")
    export.add_argument("--out", required=True, help="JSON Lines trace file to create or resume")
    export.add_argument("--mode", choices=sorted(MODE_DIRECTIONS), default="mt8")
    export.add_argument("--max-batch", type=int, default=8)
    return parser


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    config = BridgeConfig(
        model=args.model,
        device=args.device,
        max_batch=args.max_batch,
        port=args.port,
        host=args.host,
        queue_size=args.queue_size,
        max_new_tokens=args.max_new_tokens,
    )
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


def _cmd_export(args: argparse.Namespace) -> int:
    if args.max_batch < 1:
        raise ValueError("max_batch must be >= 1")
    model = BridgeModel(args.model, args.device)
    report = export_traces(model, args.dataset, args.out, mode=args.mode, max_batch=args.max_batch)
    print(report.summary())
    return 0 if not report.gaps else 1


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return _cmd_serve(args)
        return _cmd_export(args)
    except (BridgeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Serve the two-peer demo session over HTTP and WebSocket.

Equivalent to `mcam serve --config configs/session.yaml`.
"""

import argparse
import dataclasses
import sys

from mcam.config import ConfigError
from mcam.gateway import BindError, serve
from mcam.session import load_session_config


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default="configs/session.yaml")
    parser.add_argument("--bind", default="127.0.0.1:8000")
    parser.add_argument("--stream-fps", type=float, default=10.0)
    args = parser.parse_args()

    try:
        config = load_session_config(args.config)
        config = dataclasses.replace(config, clock="wall")
        serve(config, bind=args.bind, stream_fps=args.stream_fps)
    except (ConfigError, BindError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

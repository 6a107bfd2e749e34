"""Server entry point: ``mediaingest --config <path> [--log-level <level>]``."""

from __future__ import annotations

import argparse
import logging
import signal
import sys
import threading

from .config import ConfigError, load_config, validate_config
from .context import Context
from .controller import EXIT_CONFIG, run_system

LOG_FORMAT = "time=%(asctime)s level=%(levelname)s logger=%(name)s msg=%(message)s"


def setup_logging(level: str) -> None:
    logging.basicConfig(level=level.upper(), format=LOG_FORMAT, stream=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="mediaingest", description="Live media ingest origin server")
    parser.add_argument("--config", required=True, help="path to the YAML configuration file")
    parser.add_argument("--log-level", default="info", choices=["debug", "info", "warning", "error"])
    args = parser.parse_args(argv)
    setup_logging(args.log_level)

    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as e:
        print(f"config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    violations = validate_config(cfg)
    if violations:
        for v in violations:
            print(v, file=sys.stderr)
        return EXIT_CONFIG

    ctx = Context()

    def shutdown(signum: int) -> None:
        logging.getLogger("mediaingest").info("signal received signum=%d, shutting down", signum)
        ctx.cancel(f"signal {signum}")

    def on_signal(signum, frame) -> None:
        # the main thread may hold the logging or context lock right now
        threading.Thread(target=shutdown, args=(signum,), name="signal", daemon=True).start()

    signal.signal(signal.SIGINT, on_signal)
    signal.signal(signal.SIGTERM, on_signal)
    return run_system(cfg, ctx)


if __name__ == "__main__":
    sys.exit(main())

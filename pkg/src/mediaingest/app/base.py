"""Common application plumbing."""

from __future__ import annotations

from ..config import AppCfg, parse_duration
from ..context import Context
from ..runtime import ExecContext
from ..server import HttpApp, Request, Response


class App(HttpApp):
    """An HTTP application bound to its execution context.

    Subclasses list the methods they serve in ``methods``; every other
    method under the mount path is answered with 405.
    """

    methods: tuple[str, ...] = ()

    def __init__(self, cfg: AppCfg, ectx: ExecContext) -> None:
        self.name = cfg.name
        self.cfg = cfg
        self.ectx = ectx
        self.log = ectx.logger.getChild(f"app.{cfg.name}")

    def option(self, key: str, default):
        return self.cfg.appOptions.get(key, default)

    def duration_option(self, key: str, default_ms: float) -> float:
        """Option value in seconds."""
        v = self.cfg.appOptions.get(key)
        return (parse_duration(v) if v is not None else default_ms) / 1000.0

    def method_not_allowed(self, req: Request) -> Response:
        resp = Response.text(405)
        resp.set_header("Allow", ", ".join(self.methods))
        return resp

    def start(self, ctx: Context) -> None:
        """Start background work; the default app has none."""

    def stop(self) -> None:
        pass

"""Function event loops bound to one application's event stream."""

from __future__ import annotations

import abc
import threading

from ..config import FunctionCfg, parse_duration
from ..context import Cancelled, Context
from ..event import ChannelClosed, Event, Subscription
from ..runtime import ExecContext


class Function(abc.ABC):
    """Subscribes on ``start`` and handles events on its own thread until cancelled.

    The subscription is taken synchronously in ``subscribe`` (or ``start``)
    so no event published after it returns can be missed.
    """

    def __init__(self, cfg: FunctionCfg, ectx: ExecContext) -> None:
        self.name = cfg.name
        self.cfg = cfg
        self.ectx = ectx
        self.log = ectx.logger.getChild(f"fn.{cfg.name}")
        self._sub: Subscription | None = None
        self._thread: threading.Thread | None = None
        self._ctx: Context | None = None
        self.error: BaseException | None = None
        self.processed = 0

    def option(self, key: str, default=None):
        return self.cfg.options.get(key, default)

    def duration_option(self, key: str, default_ms: float) -> float:
        """Option value in seconds."""
        v = self.cfg.options.get(key)
        return (parse_duration(v) if v is not None else default_ms) / 1000.0

    @abc.abstractmethod
    def handle(self, e: Event) -> None: ...

    def on_start(self, ctx: Context) -> None:
        """Hook run on the loop thread before the first event."""

    def on_exit(self) -> None:
        """Hook run after the loop ends, after unsubscribing."""

    def subscribe(self) -> None:
        if self.ectx.stream is None:
            raise RuntimeError(f"function {self.name!r} has no event stream")
        if self._sub is None:
            self._sub = self.ectx.stream.sub()

    def start(self, ctx: Context) -> None:
        """Subscribe now and run the loop on a thread of its own."""
        self.subscribe()
        self._ctx = ctx
        self._thread = threading.Thread(target=self.run, args=(ctx,), name=f"mi-fn-{self.name}", daemon=True)
        self._thread.start()

    def run(self, ctx: Context) -> None:
        """The event loop; returns on cancellation or when the stream closes."""
        self.subscribe()
        self._ctx = ctx
        sub = self._sub
        try:
            self.on_start(ctx)
            while True:
                try:
                    e = sub.get(ctx)
                except (Cancelled, ChannelClosed):
                    return
                try:
                    self.handle(e)
                except Exception:
                    self.log.exception("event handling failed type=%s", e.type_name)
                self.processed += 1
        except BaseException as exc:
            self.error = exc
            raise
        finally:
            try:
                self.ectx.stream.desub(sub)
            except KeyError:
                pass
            self.on_exit()

    def stop(self, timeout: float | None = None) -> None:
        if self._ctx is not None:
            self._ctx.cancel("function stopped")
        self.join(timeout)

    def join(self, timeout: float | None = None) -> None:
        if self._thread is not None:
            self._thread.join(timeout)

    @property
    def alive(self) -> bool:
        return self._thread is not None and self._thread.is_alive()

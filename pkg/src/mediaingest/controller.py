"""System lifecycle: build components from a Config, run them, shut down in order.

Startup: volumes, event streams, applications, functions, servers.
Shutdown runs the same steps in reverse: servers drain in-flight requests,
functions finish queued events and in-flight work, streams stop and volumes
are finalized last.
"""

from __future__ import annotations

import logging
import threading
import time
from typing import Callable, Sequence

from .app import App, new_app
from .config import Config, parse_address, parse_duration
from .context import Cancelled, Context
from .event import ChannelStream
from .function import Function, new_function
from .runtime import ExecContext, VolumeRegistry
from .server import DEFAULT_DRAIN_TIMEOUT, DEFAULT_IDLE_TIMEOUT, HttpServer
from .volume import Volume, new_volume

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

THREAD_PREFIX = "mi-"

Controller = Callable[[Context], None]


def group_run(controllers: Sequence[Controller], ctx: Context) -> BaseException | None:
    """Run controllers concurrently under child contexts of ``ctx``.

    The first failure cancels the others and is returned. Returns None when
    all end cleanly and a Cancelled instance when ``ctx`` was cancelled from
    outside.
    """
    if not controllers:
        raise ValueError("group_run needs at least one controller")
    group = ctx.child()
    lock = threading.Lock()
    first: list[BaseException] = []

    def run(c: Controller) -> None:
        try:
            c(group)
        except BaseException as exc:
            with lock:
                if not first:
                    first.append(exc)
            group.cancel(f"controller failed: {exc}")

    threads = [threading.Thread(target=run, args=(c,), name=f"{THREAD_PREFIX}group-{i}", daemon=True)
               for i, c in enumerate(controllers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if first:
        return first[0]
    if ctx.cancelled:
        return Cancelled(ctx.reason)
    return None


def live_threads() -> list[threading.Thread]:
    """Threads started by the runtime that are still alive."""
    return [t for t in threading.enumerate() if t.name.startswith(THREAD_PREFIX) and t.is_alive()]


class StartupError(Exception):
    pass


class System:
    """All components built from one Config."""

    def __init__(self, cfg: Config, drain_timeout: float = DEFAULT_DRAIN_TIMEOUT) -> None:
        self.cfg = cfg
        self.drain_timeout = drain_timeout
        self.volumes: VolumeRegistry = VolumeRegistry()
        self._initialized_volumes: list[Volume] = []
        self.streams: dict[str, ChannelStream] = {}
        self.apps: dict[str, App] = {}
        self.functions: list[Function] = []
        self.servers: list[HttpServer] = []
        self.failure: BaseException | None = None
        self._root = Context()
        self._app_ctx = self._root.child()
        self._fn_ctx = self._root.child()
        self._stream_ctx = self._root.child()
        self._server_ctx = self._root.child()
        self._fn_monitor: threading.Thread | None = None
        self.stopped = threading.Event()
        self.wake = threading.Event()  # set on failure or external cancellation
        self.finalized_volumes: list[str] = []

    def start(self) -> None:
        try:
            self._start()
        except BaseException:
            self.stop()
            raise

    def _start(self) -> None:
        cfg = self.cfg
        vols: dict[str, Volume] = {}
        for vc in cfg.volumes:
            try:
                v = new_volume(vc.name, vc.type, vc.options)
                v.init()
            except Exception as exc:
                raise StartupError(f"volume {vc.name!r}: {exc}") from exc
            self._initialized_volumes.append(v)
            vols[vc.name] = v
        self.volumes = VolumeRegistry(vols)

        for ac in cfg.apps():
            s = ChannelStream(ac.name)
            s.start(self._stream_ctx)
            self.streams[ac.name] = s

        # apps need the full name map for cross references
        app_map: dict[str, App] = {}
        for ac in cfg.apps():
            ectx = ExecContext(self.volumes, self._app_ctx, self.streams[ac.name], None, ac, app_map)
            try:
                app_map[ac.name] = new_app(ac, ectx)
            except Exception as exc:
                raise StartupError(f"app {ac.name!r}: {exc}") from exc
        self.apps = app_map

        for ac in cfg.apps():
            app = self.apps[ac.name]
            for fc in ac.functions:
                ectx = ExecContext(self.volumes, self._fn_ctx, self.streams[ac.name], app, ac, app_map)
                try:
                    fn = new_function(fc, ectx)
                except Exception as exc:
                    raise StartupError(f"function {fc.name!r}: {exc}") from exc
                self.functions.append(fn)
        for fn in self.functions:
            fn.subscribe()
        if self.functions:
            self._fn_monitor = threading.Thread(target=self._run_functions, name=f"{THREAD_PREFIX}fn-group",
                                                daemon=True)
            self._fn_monitor.start()

        for sc in cfg.servers:
            idle = sc.options.get("idleTimeout")
            drain = sc.options.get("drainTimeout")
            try:
                server = HttpServer(
                    sc.name, parse_address(sc.address),
                    idle_timeout=parse_duration(idle) / 1000 if idle else DEFAULT_IDLE_TIMEOUT,
                    drain_timeout=parse_duration(drain) / 1000 if drain else self.drain_timeout,
                    ctx=self._server_ctx,
                )
            except OSError as exc:
                raise StartupError(f"server {sc.name!r}: cannot listen on {sc.address}: {exc}") from exc
            self.servers.append(server)
            for ac in sc.apps:
                server.register_app(self.apps[ac.name])

        for app in self.apps.values():
            app.start(self._app_ctx.child())
        for server in self.servers:
            server.start()

    def _run_functions(self) -> None:
        err = group_run([fn.run for fn in self.functions], self._fn_ctx)
        if err is not None and not isinstance(err, Cancelled):
            self.fail(err)

    def fail(self, exc: BaseException) -> None:
        if self.failure is None:
            self.failure = exc
            log.error("component failure: %s", exc)
        self.wake.set()

    def stop(self) -> None:
        if self.stopped.is_set():
            return
        t0 = time.monotonic()
        for server in self.servers:
            server.stop()
        for stream in self.streams.values():
            # let functions consume what the drained requests produced
            stream.wait_idle(max(0.0, self.drain_timeout - (time.monotonic() - t0)))
        self._fn_ctx.cancel("shutdown")
        if self._fn_monitor is not None:
            self._fn_monitor.join()
        for app in self.apps.values():
            app.stop()
        self._app_ctx.cancel("shutdown")
        for stream in self.streams.values():
            stream.stop()
        self._stream_ctx.cancel("shutdown")
        for v in reversed(self._initialized_volumes):
            try:
                v.finalize()
                self.finalized_volumes.append(v.name)
            except Exception:
                log.exception("volume finalize failed name=%s", v.name)
        self._root.cancel("shutdown")
        self.stopped.set()
        log.info("system stopped duration_ms=%.1f", (time.monotonic() - t0) * 1000)


def run_system(cfg: Config, ctx: Context, on_ready: Callable[[System], None] | None = None,
               drain_timeout: float = DEFAULT_DRAIN_TIMEOUT) -> int:
    """Run until ``ctx`` is cancelled or a component fails; returns an exit code."""
    system = System(cfg, drain_timeout)
    try:
        system.start()
    except Exception as exc:
        log.error("startup failed: %s", exc)
        return EXIT_RUNTIME
    remove = ctx.on_cancel(system.wake.set)
    try:
        if on_ready is not None:
            on_ready(system)
        while not system.wake.wait(0.5):
            pass
    finally:
        remove()
        system.stop()
    return EXIT_RUNTIME if system.failure is not None else EXIT_OK

"""Age-based deletion of committed files matching path patterns."""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass

from ..config import FunctionCfg, parse_duration
from ..context import Context
from ..event import Event, FileEvent, FileEventType
from ..glob import path_glob
from ..runtime import ExecContext
from ..volume import NotFoundError, Volume, VolumeError
from .base import Function

DEFAULT_IDLE_INTERVAL_MS = 10_000


@dataclass
class CleanupEntry:
    path: str
    committed_at: float


class CleanupFunction(Function):
    """Entries join the tail in commit order, so the head is always the oldest.

    A timer thread sleeps until the head expires (or for the idle interval
    when the list is empty), then deletes every expired entry from all
    configured volumes.
    """

    def __init__(self, cfg: FunctionCfg, ectx: ExecContext, clock=time.monotonic) -> None:
        super().__init__(cfg, ectx)
        self.patterns = [path_glob(p) for p in cfg.options["patterns"]]
        self.max_age = parse_duration(cfg.options["maxAge"]) / 1000.0
        self.idle_interval = self.duration_option("idleInterval", DEFAULT_IDLE_INTERVAL_MS)
        refs = cfg.options.get("volumeRefs")
        if refs is None:
            refs = ectx.app_cfg.volumeRefs if ectx.app_cfg is not None else []
        self.volumes: list[Volume] = [ectx.volumes.lookup(n) for n in refs]
        self.clock = clock
        self.queue: deque[CleanupEntry] = deque()
        self._latest: dict[str, float] = {}
        self._cond = threading.Condition()
        self._timer: threading.Thread | None = None
        self._stopping = False
        self.idle_wakeups: list[float] = []
        self.deleted: list[tuple[str, float]] = []

    def matches(self, path: str) -> bool:
        return any(g.match(path) for g in self.patterns)

    def handle(self, e: Event) -> None:
        if not isinstance(e, FileEvent) or e.kind is not FileEventType.COMMITTED:
            return
        path = str(e.file.path)
        if not self.matches(path):
            return
        now = self.clock()
        with self._cond:
            self.queue.append(CleanupEntry(path, now))
            # a re-committed path restarts its age; older entries become stale
            self._latest[path] = now
            self._cond.notify_all()

    def on_start(self, ctx: Context) -> None:
        self._timer = threading.Thread(target=self._timer_loop, args=(ctx,), name=f"mi-fn-{self.name}-timer",
                                       daemon=True)
        self._timer.start()

    def _wake(self) -> None:
        with self._cond:
            self._cond.notify_all()

    def _timer_loop(self, ctx: Context) -> None:
        remove = ctx.on_cancel(self._wake)
        try:
            while not ctx.cancelled and not self._stopping:
                expired: list[str] = []
                with self._cond:
                    if not self.queue:
                        appended = self._cond.wait(self.idle_interval)
                        if not appended and not self.queue and not ctx.cancelled:
                            self.idle_wakeups.append(self.clock())
                        continue
                    now = self.clock()
                    head = self.queue[0]
                    due = head.committed_at + self.max_age
                    if now < due:
                        self._cond.wait(due - now)
                        continue
                    while self.queue and self.queue[0].committed_at + self.max_age <= now:
                        entry = self.queue.popleft()
                        if self._latest.get(entry.path) == entry.committed_at:
                            del self._latest[entry.path]
                            expired.append(entry.path)
                for path in expired:
                    self._delete(path)
        finally:
            remove()

    def _delete(self, path: str) -> None:
        for vol in self.volumes:
            try:
                f = vol.open(path)
                vol.delete(path)
            except NotFoundError:
                continue
            except VolumeError as exc:
                self.log.warning("cleanup delete failed volume=%s path=%s: %s", vol.name, path, exc)
                continue
            self.deleted.append((path, self.clock()))
            self.log.debug("deleted volume=%s path=%s", vol.name, path)
            self.ectx.publish(FileEvent(f, FileEventType.DELETED))

    def on_exit(self) -> None:
        self._stopping = True
        self._wake()
        if self._timer is not None:
            self._timer.join()

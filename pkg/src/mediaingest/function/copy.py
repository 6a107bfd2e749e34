"""Copy committed files to a second volume."""

from __future__ import annotations

import threading

from ..config import FunctionCfg
from ..event import Event, FileEvent, FileEventType
from ..runtime import ExecContext
from ..volume import VolumeError, VolumeFile
from .base import Function


class CopyFunction(Function):
    """Each Committed file is copied on its own thread; exit waits for all copies."""

    def __init__(self, cfg: FunctionCfg, ectx: ExecContext) -> None:
        super().__init__(cfg, ectx)
        self.target = ectx.volumes.lookup(cfg.options["volumeRef"])
        self._workers: set[threading.Thread] = set()
        self._lock = threading.Lock()
        self.copied: list[str] = []
        self.failed: list[str] = []

    def handle(self, e: Event) -> None:
        if not isinstance(e, FileEvent) or e.kind is not FileEventType.COMMITTED:
            return
        if e.file.volume is self.target:
            return
        t = threading.Thread(target=self._copy, args=(e.file,), name=f"mi-fn-{self.name}-copy", daemon=True)
        with self._lock:
            self._workers.add(t)
        t.start()

    def _copy(self, src: VolumeFile) -> None:
        try:
            try:
                reader = src.reader()
            except VolumeError as exc:
                self.log.warning("copy skipped path=%s: %s", src.path, exc)
                with self._lock:
                    self.failed.append(str(src.path))
                return
            try:
                writer = self.target.open_create(src.path).writer(in_place=False)
                try:
                    reader.copy_to(writer)
                except BaseException:
                    writer.abort()
                    raise
                writer.commit()
            finally:
                reader.close()
            with self._lock:
                self.copied.append(str(src.path))
            self.log.debug("copied path=%s to=%s", src.path, self.target.name)
        except Exception as exc:
            self.log.error("copy failed path=%s: %s", src.path, exc)
            with self._lock:
                self.failed.append(str(src.path))
        finally:
            with self._lock:
                self._workers.discard(threading.current_thread())

    @property
    def in_flight(self) -> int:
        with self._lock:
            return len(self._workers)

    def on_exit(self) -> None:
        with self._lock:
            workers = list(self._workers)
        for t in workers:
            t.join()

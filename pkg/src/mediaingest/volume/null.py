"""Volume that discards writes and reads as empty. Meant for tests."""

from __future__ import annotations

import threading
from datetime import datetime, timezone

from .base import (
    FileReader,
    FileWriter,
    ReaderClosedError,
    SeekError,
    Volume,
    VolumeFile,
    VolumePath,
    WriterExistsError,
)


class NullVolume(Volume):
    kind = "null"

    def __init__(self, name: str) -> None:
        super().__init__(name)
        self._lock = threading.Lock()
        self._writers: dict[str, _NullWriter] = {}
        self._readers: set[_NullReader] = set()
        self.init_time = datetime.now(timezone.utc)

    def init(self) -> None:
        self.init_time = datetime.now(timezone.utc)

    def finalize(self) -> None:
        with self._lock:
            writers = list(self._writers.values())
            readers = list(self._readers)
        for w in writers:
            if not w.closed:
                w.abort()
        for r in readers:
            r.close()

    def open(self, path: str) -> VolumeFile:
        return _NullFile(self, VolumePath(path))

    def open_create(self, path: str) -> VolumeFile:
        return _NullFile(self, VolumePath(path))

    def delete(self, path: str) -> None:
        VolumePath(path)


class _NullFile(VolumeFile):
    volume: NullVolume

    def reader(self) -> FileReader:
        r = _NullReader(self.volume, self.path)
        with self.volume._lock:
            self.volume._readers.add(r)
        return r

    def writer(self, in_place: bool) -> FileWriter:
        vol = self.volume
        with vol._lock:
            if self.path in vol._writers:
                raise WriterExistsError(f"{self.path}: writer already open")
            w = _NullWriter(vol, self.path, in_place)
            vol._writers[self.path] = w
            return w


class _NullWriter(FileWriter):
    def __init__(self, volume: NullVolume, path: VolumePath, in_place: bool) -> None:
        super().__init__(in_place)
        self._volume = volume
        self._path = path
        self.done = threading.Event()

    def write(self, data: bytes) -> int:
        self._check_open()
        n = len(data)
        self.bytes_written += n
        return n

    def _close(self) -> None:
        self._check_open()
        self.closed = True
        with self._volume._lock:
            self._volume._writers.pop(self._path, None)
        self.done.set()

    def commit(self) -> None:
        self._close()

    def abort(self) -> None:
        self._close()


class _NullReader(FileReader):
    def __init__(self, volume: NullVolume, path: VolumePath) -> None:
        super().__init__()
        self._volume = volume
        with volume._lock:
            self._writer = volume._writers.get(path)

    @property
    def size(self) -> int:
        return 0

    @property
    def mod_time(self) -> datetime:
        return self._volume.init_time

    def write_done(self) -> threading.Event:
        if self._writer is not None:
            return self._writer.done
        ev = threading.Event()
        ev.set()
        return ev

    def read(self, size: int = -1) -> bytes:
        if self.closed:
            raise ReaderClosedError("reader closed")
        return b""

    def seek(self, offset: int, whence: int = 0) -> int:
        if self.closed:
            raise ReaderClosedError("reader closed")
        if offset != 0:
            raise SeekError("seek beyond end of empty file")
        return 0

    def tell(self) -> int:
        return 0

    def close(self) -> None:
        if not self.closed:
            with self._volume._lock:
                self._volume._readers.discard(self)
        super().close()

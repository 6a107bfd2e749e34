"""File-oriented storage contract shared by all volume backends."""

from __future__ import annotations

import abc
import io
import re
import threading
from datetime import datetime
from typing import BinaryIO


class VolumeError(Exception):
    pass


class NotFoundError(VolumeError, FileNotFoundError):
    pass


class InvalidPathError(VolumeError, ValueError):
    pass


class WriterExistsError(VolumeError):
    pass


class WriterClosedError(VolumeError):
    pass


class ReaderClosedError(VolumeError):
    pass


class AbortedWriteError(VolumeError):
    """The in-place writer feeding this reader aborted its data."""


class SeekError(VolumeError, ValueError):
    pass


# fs writers park data under "<name>.<16 hex>.tmp"; user paths may never look like that.
TEMP_NAME_RE = re.compile(r"\.[0-9a-f]{16}\.tmp$")


class VolumePath(str):
    """Normalized relative '/'-separated path."""

    def __new__(cls, value: str) -> VolumePath:
        if isinstance(value, VolumePath):
            return value
        if not isinstance(value, str):
            raise InvalidPathError(f"path must be a string, got {type(value).__name__}")
        stripped = value.lstrip("/")
        if not stripped:
            raise InvalidPathError("empty path")
        segments = stripped.split("/")
        for seg in segments:
            if seg in ("", ".", ".."):
                raise InvalidPathError(f"invalid path segment {seg!r} in {value!r}")
            if "\x00" in seg or "\\" in seg:
                raise InvalidPathError(f"invalid character in {value!r}")
            if TEMP_NAME_RE.search(seg):
                raise InvalidPathError(f"reserved temporary name in {value!r}")
        return super().__new__(cls, "/".join(segments))

    @property
    def segments(self) -> list[str]:
        return self.split("/")


class FileWriter(abc.ABC):
    """Append-only writer. Closed by exactly one of commit() or abort()."""

    def __init__(self, in_place: bool) -> None:
        self.in_place = in_place
        self.bytes_written = 0
        self.closed = False

    @abc.abstractmethod
    def write(self, data: bytes) -> int: ...

    @abc.abstractmethod
    def commit(self) -> None: ...

    @abc.abstractmethod
    def abort(self) -> None: ...

    def _check_open(self) -> None:
        if self.closed:
            raise WriterClosedError("writer already closed")

    def __enter__(self) -> FileWriter:
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if self.closed:
            return
        if exc_type is None:
            self.commit()
        else:
            self.abort()


class FileReader(io.RawIOBase, abc.ABC):
    """Reader over a volume file.

    ``writer_active`` records whether an in-place writer was feeding the file
    when the reader was acquired; such readers block at the end of the
    written data until the writer commits or aborts.
    """

    writer_active: bool = False

    def readable(self) -> bool:
        return True

    def seekable(self) -> bool:
        return True

    @property
    @abc.abstractmethod
    def size(self) -> int:
        """Currently observable size in bytes."""

    @property
    @abc.abstractmethod
    def mod_time(self) -> datetime: ...

    @abc.abstractmethod
    def write_done(self) -> threading.Event:
        """Event that is set once no writer is active on the file."""

    def readinto(self, b) -> int:
        data = self.read(len(b))
        n = len(data)
        b[:n] = data
        return n

    def copy_to(self, sink: BinaryIO, chunk_size: int = 64 * 1024) -> int:
        """Copy everything up to EOF into ``sink``; returns the byte count."""
        total = 0
        while True:
            data = self.read(chunk_size)
            if not data:
                return total
            sink.write(data)
            total += len(data)


class VolumeFile(abc.ABC):
    def __init__(self, volume: Volume, path: VolumePath) -> None:
        self.volume = volume
        self.path = path

    @abc.abstractmethod
    def reader(self) -> FileReader: ...

    @abc.abstractmethod
    def writer(self, in_place: bool) -> FileWriter: ...

    def __eq__(self, other: object) -> bool:
        return isinstance(other, VolumeFile) and other.volume is self.volume and other.path == self.path

    def __hash__(self) -> int:
        return hash((id(self.volume), self.path))

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.volume.name}:{self.path}>"


class Volume(abc.ABC):
    kind = "abstract"

    def __init__(self, name: str) -> None:
        self.name = name

    def init(self) -> None:
        pass

    def finalize(self) -> None:
        pass

    @abc.abstractmethod
    def open(self, path: str) -> VolumeFile: ...

    @abc.abstractmethod
    def open_create(self, path: str) -> VolumeFile: ...

    @abc.abstractmethod
    def delete(self, path: str) -> None: ...

    def exists(self, path: str) -> bool:
        try:
            self.open(path)
        except (NotFoundError, InvalidPathError):
            return False
        return True

    def read_all(self, path: str) -> bytes:
        with self.open(path).reader() as r:
            return r.read()

    def write_all(self, path: str, data: bytes, in_place: bool = False) -> None:
        with self.open_create(path).writer(in_place) as w:
            w.write(data)

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name!r}>"

"""Volume backed by a directory on the local filesystem.

Commit and abort are implemented with renames inside the file's own
directory so that they are atomic. In-place writers park the previous file
under a temporary name and write the new content at the real path; snapshot
writers write a temporary file that replaces the real path on commit.
"""

from __future__ import annotations

import errno
import logging
import os
import secrets
import threading
from datetime import datetime, timezone

from .base import (
    TEMP_NAME_RE,
    AbortedWriteError,
    FileReader,
    FileWriter,
    NotFoundError,
    ReaderClosedError,
    SeekError,
    Volume,
    VolumeError,
    VolumeFile,
    VolumePath,
    WriterExistsError,
)

log = logging.getLogger(__name__)


def _temp_name(full: str) -> str:
    return f"{full}.{secrets.token_hex(8)}.tmp"


class _InPlaceState:
    """Progress of one in-place write, shared with the readers it feeds."""

    def __init__(self) -> None:
        self.bytes_written = 0
        self.writing = True
        self.aborted = False


class _FsRecord:
    def __init__(self, path: VolumePath) -> None:
        self.path = path
        self.cond = threading.Condition()
        self.writer: _FsWriter | None = None
        self.handles = 0


class FsVolume(Volume):
    kind = "fs"

    def __init__(self, name: str, root_path: str) -> None:
        super().__init__(name)
        if not root_path:
            raise ValueError("root_path must not be empty")
        self.root_path = os.path.abspath(root_path)
        self._real_root = ""
        self.open_files: dict[str, _FsRecord] = {}
        self._lock = threading.Lock()
        self._readers: set[_FsReader] = set()
        self._writers: set[_FsWriter] = set()

    def init(self) -> None:
        try:
            os.makedirs(self.root_path, exist_ok=True)
        except OSError as e:
            raise VolumeError(f"{self.name}: cannot create root {self.root_path}: {e}") from e
        if not os.path.isdir(self.root_path):
            raise VolumeError(f"{self.name}: root {self.root_path} is not a directory")
        self._real_root = os.path.realpath(self.root_path)
        self._sweep_temp_files()

    def _sweep_temp_files(self) -> None:
        for dirpath, _dirs, files in os.walk(self.root_path):
            for f in files:
                if TEMP_NAME_RE.search(f):
                    full = os.path.join(dirpath, f)
                    log.warning("removing orphaned temporary file %s", full)
                    try:
                        os.unlink(full)
                    except OSError:
                        pass

    def finalize(self) -> None:
        with self._lock:
            writers = list(self._writers)
            readers = list(self._readers)
        for w in writers:
            try:
                w.abort()
            except VolumeError:
                pass
        for r in readers:
            r._force_close()

    def disk_path(self, path: str) -> str:
        p = VolumePath(path)
        full = os.path.join(self.root_path, *p.segments)
        real_root = self._real_root or os.path.realpath(self.root_path)
        parent = os.path.realpath(os.path.dirname(full))
        if parent != real_root and not parent.startswith(real_root + os.sep):
            raise NotFoundError(f"{p}: resolves outside the volume")
        return full

    # record bookkeeping: entries live only while a reader or writer is open

    def _acquire(self, path: VolumePath) -> _FsRecord:
        with self._lock:
            rec = self.open_files.get(path)
            if rec is None:
                rec = self.open_files[path] = _FsRecord(path)
            rec.handles += 1
            return rec

    def _release(self, rec: _FsRecord) -> None:
        with self._lock:
            rec.handles -= 1
            if rec.handles == 0 and self.open_files.get(rec.path) is rec:
                del self.open_files[rec.path]

    def open(self, path: str) -> VolumeFile:
        p = VolumePath(path)
        full = self.disk_path(p)
        if os.path.islink(full) or not os.path.isfile(full):
            raise NotFoundError(f"{p}: no such file")
        return _FsFile(self, p)

    def open_create(self, path: str) -> VolumeFile:
        p = VolumePath(path)
        full = self.disk_path(p)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        full = self.disk_path(p)
        try:
            fd = os.open(full, os.O_CREAT | os.O_WRONLY | os.O_NOFOLLOW, 0o644)
        except OSError as e:
            raise VolumeError(f"{p}: {e}") from e
        os.close(fd)
        return _FsFile(self, p)

    def delete(self, path: str) -> None:
        p = VolumePath(path)
        full = self.disk_path(p)
        with self._lock:
            rec = self.open_files.get(p)
            if rec is not None and rec.writer is not None:
                raise WriterExistsError(f"{p}: cannot delete while a writer is open")
            if os.path.islink(full) or not os.path.isfile(full):
                raise NotFoundError(f"{p}: no such file")
            try:
                os.unlink(full)
            except FileNotFoundError:
                raise NotFoundError(f"{p}: no such file") from None

    def exists(self, path: str) -> bool:
        try:
            full = self.disk_path(path)
        except VolumeError:
            return False
        return os.path.isfile(full) and not os.path.islink(full)


class _FsFile(VolumeFile):
    volume: FsVolume

    def reader(self) -> FileReader:
        vol = self.volume
        full = vol.disk_path(self.path)
        rec = vol._acquire(self.path)
        try:
            with rec.cond:
                try:
                    fd = os.open(full, os.O_RDONLY | os.O_NOFOLLOW)
                except OSError as e:
                    if e.errno in (errno.ENOENT, errno.ELOOP, errno.EISDIR):
                        raise NotFoundError(f"{self.path}: no such file") from None
                    raise VolumeError(f"{self.path}: {e}") from e
                w = rec.writer
                state = w.state if w is not None and w.in_place else None
                r = _FsReader(vol, rec, fd, state)
        except BaseException:
            vol._release(rec)
            raise
        with vol._lock:
            vol._readers.add(r)
        return r

    def writer(self, in_place: bool) -> FileWriter:
        vol = self.volume
        full = vol.disk_path(self.path)
        rec = vol._acquire(self.path)
        try:
            with rec.cond:
                if rec.writer is not None:
                    raise WriterExistsError(f"{self.path}: writer already open")
                os.makedirs(os.path.dirname(full), exist_ok=True)
                w = _FsWriter(vol, rec, full, in_place)
                rec.writer = w
        except BaseException:
            vol._release(rec)
            raise
        with vol._lock:
            vol._writers.add(w)
        return w


class _FsWriter(FileWriter):
    def __init__(self, volume: FsVolume, rec: _FsRecord, full: str, in_place: bool) -> None:
        super().__init__(in_place)
        self._volume = volume
        self._rec = rec
        self._full = full
        self.done = threading.Event()
        self.state = _InPlaceState() if in_place else None
        self._parked: str | None = None
        if in_place:
            if os.path.lexists(self._full):
                self._parked = _temp_name(full)
                os.rename(full, self._parked)
            self._fd = os.open(full, os.O_CREAT | os.O_TRUNC | os.O_WRONLY | os.O_NOFOLLOW, 0o644)
            self._temp = None
        else:
            self._temp = _temp_name(full)
            self._fd = os.open(self._temp, os.O_CREAT | os.O_EXCL | os.O_WRONLY, 0o644)

    def write(self, data) -> int:
        self._check_open()
        view = memoryview(data).cast("B")
        n = len(view)
        off = 0
        try:
            while off < n:
                off += os.write(self._fd, view[off:])
        except OSError as e:
            raise VolumeError(f"{self._rec.path}: write failed: {e}") from e
        self.bytes_written += n
        if self.state is not None:
            with self._rec.cond:
                self.state.bytes_written = self.bytes_written
                self._rec.cond.notify_all()
        return n

    def _finish(self) -> None:
        # caller holds rec.cond
        self.closed = True
        if self.state is not None:
            self.state.writing = False
        self._rec.writer = None
        self.done.set()
        self._rec.cond.notify_all()

    def _close_fd(self) -> None:
        try:
            os.close(self._fd)
        except OSError:
            pass

    def commit(self) -> None:
        rec = self._rec
        with rec.cond:
            self._check_open()
            self._close_fd()
            try:
                if self.in_place:
                    if self._parked is not None:
                        os.unlink(self._parked)
                else:
                    os.replace(self._temp, self._full)
            finally:
                self._finish()
        self._cleanup()

    def abort(self) -> None:
        rec = self._rec
        with rec.cond:
            self._check_open()
            self._close_fd()
            try:
                if self.in_place:
                    self.state.aborted = True
                    if self._parked is not None:
                        os.replace(self._parked, self._full)
                    else:
                        os.unlink(self._full)
                else:
                    os.unlink(self._temp)
            except OSError as e:
                log.warning("%s: abort cleanup failed: %s", rec.path, e)
            finally:
                self._finish()
        self._cleanup()

    def _cleanup(self) -> None:
        with self._volume._lock:
            self._volume._writers.discard(self)
        self._volume._release(self._rec)


class _FsReader(FileReader):
    def __init__(self, volume: FsVolume, rec: _FsRecord, fd: int, state: _InPlaceState | None) -> None:
        super().__init__()
        self._volume = volume
        self._rec = rec
        self._fd = fd
        self._state = state
        self.writer_active = state is not None
        self._pos = 0
        self._forced = False

    @property
    def size(self) -> int:
        st = self._state
        if st is not None and st.writing:
            return st.bytes_written
        return os.fstat(self._fd).st_size

    @property
    def mod_time(self) -> datetime:
        return datetime.fromtimestamp(os.fstat(self._fd).st_mtime, timezone.utc)

    def write_done(self) -> threading.Event:
        w = self._rec.writer
        if w is not None:
            return w.done
        ev = threading.Event()
        ev.set()
        return ev

    def _check(self) -> None:
        if self.closed or self._forced:
            raise ReaderClosedError("reader closed")

    def read(self, size: int = -1) -> bytes:
        if size is None or size < 0:
            chunks = []
            while True:
                data = self.read(1 << 20)
                if not data:
                    return b"".join(chunks)
                chunks.append(data)
        st = self._state
        if st is not None:
            with self._rec.cond:
                while True:
                    self._check()
                    if st.aborted:
                        raise AbortedWriteError(f"{self._rec.path}: in-place write aborted")
                    avail = st.bytes_written - self._pos
                    if avail > 0 or size == 0:
                        size = min(size, avail)
                        break
                    if not st.writing:
                        return b""
                    self._rec.cond.wait()
        self._check()
        data = os.pread(self._fd, size, self._pos)
        self._pos += len(data)
        return data

    def seek(self, offset: int, whence: int = 0) -> int:
        self._check()
        extent = self.size
        if whence == 0:
            target = offset
        elif whence == 1:
            target = self._pos + offset
        elif whence == 2:
            target = extent + offset
        else:
            raise ValueError(f"invalid whence {whence}")
        if target < 0 or target > extent:
            raise SeekError(f"seek to {target} outside [0, {extent}]")
        self._pos = target
        return target

    def tell(self) -> int:
        return self._pos

    def copy_to(self, sink, chunk_size: int = 64 * 1024) -> int:
        """Copy to EOF, using sendfile(2) when the file is complete and the
        sink is a socket-like object with a file descriptor."""
        if self._state is None or not self._state.writing:
            try:
                out_fd = sink.fileno()
            except (AttributeError, OSError, ValueError):
                out_fd = None
            if out_fd is not None and hasattr(os, "sendfile"):
                return self._sendfile(sink, out_fd)
        return super().copy_to(sink, chunk_size)

    def _sendfile(self, sink, out_fd: int) -> int:
        if hasattr(sink, "flush"):
            sink.flush()
        end = os.fstat(self._fd).st_size
        total = 0
        while self._pos < end:
            try:
                n = os.sendfile(out_fd, self._fd, self._pos, end - self._pos)
            except BlockingIOError:
                continue
            if n == 0:
                break
            self._pos += n
            total += n
        return total

    def _force_close(self) -> None:
        with self._rec.cond:
            self._forced = True
            self._rec.cond.notify_all()
        self.close()

    def close(self) -> None:
        if not self.closed:
            with self._volume._lock:
                present = self in self._volume._readers
                self._volume._readers.discard(self)
            if present:
                try:
                    os.close(self._fd)
                except OSError:
                    pass
                self._volume._release(self._rec)
        super().close()

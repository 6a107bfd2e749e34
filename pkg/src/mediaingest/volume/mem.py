"""In-memory volume storing files as linked lists of fixed-size blocks.

A file points at a super-block, the entry into its block chain. Snapshot
writers build a fresh chain and swap the file's super-block on commit; the
old chain is parked on a pending-GC list until its last reader closes, after
which its blocks go back to the pool for reuse.
"""

from __future__ import annotations

import threading
from collections import deque
from datetime import datetime, timezone

from .base import (
    AbortedWriteError,
    FileReader,
    FileWriter,
    InvalidPathError,
    NotFoundError,
    ReaderClosedError,
    SeekError,
    Volume,
    VolumeError,
    VolumeFile,
    VolumePath,
    WriterExistsError,
)

DEFAULT_BLOCK_SIZE = 65536


def _now() -> datetime:
    return datetime.now(timezone.utc)


class Block:
    __slots__ = ("data", "used", "next")

    def __init__(self, size: int) -> None:
        self.data = bytearray(size)
        self.used = 0
        self.next: Block | None = None


class SuperBlock:
    __slots__ = ("head", "tail", "total_bytes", "mod_time", "open_readers",
                 "pending_gc", "writing", "aborted", "done", "released")

    def __init__(self) -> None:
        self.head: Block | None = None
        self.tail: Block | None = None
        self.total_bytes = 0
        self.mod_time = _now()
        self.open_readers = 0
        self.pending_gc = False
        self.writing = False
        self.aborted = False
        self.done = threading.Event()
        self.released = False

    def chain_length(self) -> int:
        n, b = 0, self.head
        while b is not None:
            n += 1
            b = b.next
        return n


class _FileRecord:
    def __init__(self, path: VolumePath) -> None:
        self.path = path
        self.cond = threading.Condition()
        self.current = SuperBlock()
        self.current.done.set()
        self.prev: SuperBlock | None = None
        self.writer: _MemWriter | None = None
        self.deleted = False


class MemVolume(Volume):
    kind = "mem"

    def __init__(self, name: str, block_size: int = DEFAULT_BLOCK_SIZE) -> None:
        super().__init__(name)
        if block_size <= 0:
            raise ValueError("block_size must be positive")
        self.block_size = block_size
        self._files: dict[str, _FileRecord] = {}
        self._files_lock = threading.Lock()
        # guards reader counters and the pending-GC list
        self._gc_lock = threading.Lock()
        self.pending_gc: list[SuperBlock] = []
        self._pool: deque[Block] = deque()
        self._pool_lock = threading.Lock()
        self.blocks_allocated = 0
        self._readers: set[_MemReader] = set()
        self._writers: set[_MemWriter] = set()
        self._handles_lock = threading.Lock()

    # block pool

    def allocate_block(self) -> Block:
        with self._pool_lock:
            if self._pool:
                b = self._pool.popleft()
                b.used = 0
                b.next = None
                return b
            self.blocks_allocated += 1
        return Block(self.block_size)

    def release_chain(self, head: Block | None) -> None:
        blocks = []
        while head is not None:
            nxt = head.next
            head.next = None
            blocks.append(head)
            head = nxt
        with self._pool_lock:
            self._pool.extend(blocks)

    def block_stats(self) -> dict[str, int]:
        with self._pool_lock:
            pooled = len(self._pool)
            allocated = self.blocks_allocated
        with self._gc_lock:
            pending = len(self.pending_gc)
        return {"allocated": allocated, "pooled": pooled, "live": allocated - pooled,
                "pending_gc": pending}

    def _retire(self, sb: SuperBlock) -> None:
        with self._gc_lock:
            if sb.open_readers == 0:
                self._release_sb(sb)
            else:
                sb.pending_gc = True
                self.pending_gc.append(sb)

    def _release_sb(self, sb: SuperBlock) -> None:
        # caller holds _gc_lock
        if sb.released:
            return
        sb.released = True
        head = sb.head
        sb.head = sb.tail = None
        self.release_chain(head)

    def _reader_closed(self, sb: SuperBlock) -> None:
        with self._gc_lock:
            sb.open_readers -= 1
            if not self.pending_gc:
                return
            keep = []
            for p in self.pending_gc:
                if p.open_readers == 0:
                    p.pending_gc = False
                    self._release_sb(p)
                else:
                    keep.append(p)
            self.pending_gc = keep

    # volume interface

    def init(self) -> None:
        pass

    def finalize(self) -> None:
        with self._handles_lock:
            writers = list(self._writers)
            readers = list(self._readers)
        for w in writers:
            try:
                w.abort()
            except VolumeError:
                pass
        for r in readers:
            r._force_close()
        with self._files_lock:
            self._files.clear()
        with self._gc_lock:
            self.pending_gc.clear()
        with self._pool_lock:
            self._pool.clear()

    def _record(self, path: str) -> _FileRecord:
        with self._files_lock:
            rec = self._files.get(path)
        if rec is None:
            raise NotFoundError(f"{path}: no such file")
        return rec

    def open(self, path: str) -> VolumeFile:
        p = VolumePath(path)
        self._record(p)
        return _MemFile(self, p)

    def open_create(self, path: str) -> VolumeFile:
        p = VolumePath(path)
        with self._files_lock:
            if p not in self._files:
                self._files[p] = _FileRecord(p)
        return _MemFile(self, p)

    def delete(self, path: str) -> None:
        p = VolumePath(path)
        with self._files_lock:
            rec = self._files.get(p)
            if rec is None:
                raise NotFoundError(f"{p}: no such file")
            with rec.cond:
                if rec.writer is not None:
                    raise WriterExistsError(f"{p}: cannot delete while a writer is open")
                del self._files[p]
                rec.deleted = True
                sb = rec.current
        self._retire(sb)

    def exists(self, path: str) -> bool:
        try:
            p = VolumePath(path)
        except InvalidPathError:
            return False
        with self._files_lock:
            return p in self._files


class _MemFile(VolumeFile):
    volume: MemVolume

    def reader(self) -> FileReader:
        rec = self.volume._record(self.path)
        with rec.cond:
            if rec.deleted:
                raise NotFoundError(f"{self.path}: no such file")
            sb = rec.current
            with self.volume._gc_lock:
                sb.open_readers += 1
            r = _MemReader(self.volume, rec, sb)
        with self.volume._handles_lock:
            self.volume._readers.add(r)
        return r

    def writer(self, in_place: bool) -> FileWriter:
        vol = self.volume
        rec = vol._record(self.path)
        with rec.cond:
            if rec.deleted:
                raise NotFoundError(f"{self.path}: no such file")
            if rec.writer is not None:
                raise WriterExistsError(f"{self.path}: writer already open")
            sb = SuperBlock()
            w = _MemWriter(vol, rec, sb, in_place)
            if in_place:
                sb.writing = True
                rec.prev = rec.current
                rec.current = sb
            rec.writer = w
        with vol._handles_lock:
            vol._writers.add(w)
        return w


class _MemWriter(FileWriter):
    def __init__(self, volume: MemVolume, rec: _FileRecord, sb: SuperBlock, in_place: bool) -> None:
        super().__init__(in_place)
        self._volume = volume
        self._rec = rec
        self.sb = sb

    def write(self, data) -> int:
        data = memoryview(data).cast("B")
        n = len(data)
        bs = self._volume.block_size
        with self._rec.cond:
            self._check_open()
            sb = self.sb
            off = 0
            while off < n:
                tail = sb.tail
                if tail is None or tail.used == bs:
                    blk = self._volume.allocate_block()
                    if tail is None:
                        sb.head = blk
                    else:
                        tail.next = blk
                    sb.tail = tail = blk
                k = min(bs - tail.used, n - off)
                tail.data[tail.used:tail.used + k] = data[off:off + k]
                tail.used += k
                off += k
                sb.total_bytes += k
            self.bytes_written += n
            if self.in_place:
                self._rec.cond.notify_all()
        return n

    def _finish(self) -> None:
        self.closed = True
        self._rec.writer = None
        self.sb.writing = False
        self.sb.done.set()
        self._rec.cond.notify_all()
        with self._volume._handles_lock:
            self._volume._writers.discard(self)

    def commit(self) -> None:
        rec = self._rec
        with rec.cond:
            self._check_open()
            self.sb.mod_time = _now()
            if self.in_place:
                old, rec.prev = rec.prev, None
            else:
                old, rec.current = rec.current, self.sb
            self._finish()
        if old is not None:
            self._volume._retire(old)

    def abort(self) -> None:
        rec = self._rec
        with rec.cond:
            self._check_open()
            if self.in_place:
                self.sb.aborted = True
                rec.current, rec.prev = rec.prev, None
            self._finish()
        # a snapshot chain was never visible to readers, so it is pooled right away
        self._volume._retire(self.sb)


class _MemReader(FileReader):
    def __init__(self, volume: MemVolume, rec: _FileRecord, sb: SuperBlock) -> None:
        super().__init__()
        self._volume = volume
        self._rec = rec
        self._sb = sb
        self.writer_active = sb.writing
        self._pos = 0
        self._block = sb.head
        self._block_off = 0
        self._forced = False

    @property
    def size(self) -> int:
        return self._sb.total_bytes

    @property
    def mod_time(self) -> datetime:
        return self._sb.mod_time

    def write_done(self) -> threading.Event:
        w = self._rec.writer
        if w is not None:
            return w.sb.done
        ev = threading.Event()
        ev.set()
        return ev

    def _check(self) -> None:
        if self.closed or self._forced:
            raise ReaderClosedError("reader closed")

    def _copy(self, n: int) -> bytes:
        # caller holds rec.cond and guarantees n <= total_bytes - pos
        out = bytearray()
        bs = self._volume.block_size
        while n > 0:
            if self._block is None:
                self._block = self._sb.head
                self._block_off = 0
            elif self._block_off == bs:
                self._block = self._block.next
                self._block_off = 0
            blk = self._block
            k = min(blk.used - self._block_off, n)
            out += blk.data[self._block_off:self._block_off + k]
            self._block_off += k
            self._pos += k
            n -= k
        return bytes(out)

    def read(self, size: int = -1) -> bytes:
        if size is None or size < 0:
            chunks = []
            while True:
                data = self.read(1 << 20)
                if not data:
                    return b"".join(chunks)
                chunks.append(data)
        with self._rec.cond:
            while True:
                self._check()
                sb = self._sb
                if sb.aborted:
                    raise AbortedWriteError(f"{self._rec.path}: in-place write aborted")
                avail = sb.total_bytes - self._pos
                if avail > 0 or size == 0:
                    return self._copy(min(avail, size))
                if not sb.writing:
                    return b""
                self._rec.cond.wait()

    def seek(self, offset: int, whence: int = 0) -> int:
        with self._rec.cond:
            self._check()
            if whence == 0:
                target = offset
            elif whence == 1:
                target = self._pos + offset
            elif whence == 2:
                target = self._sb.total_bytes + offset
            else:
                raise ValueError(f"invalid whence {whence}")
            if target < 0 or target > self._sb.total_bytes:
                raise SeekError(f"seek to {target} outside [0, {self._sb.total_bytes}]")
            # walk from the head; chains are short-lived
            self._pos = 0
            self._block = self._sb.head
            self._block_off = 0
            bs = self._volume.block_size
            remaining = target
            while remaining > 0:
                if self._block_off == bs:
                    self._block = self._block.next
                    self._block_off = 0
                k = min(self._block.used - self._block_off, remaining)
                self._block_off += k
                remaining -= k
            self._pos = target
            return target

    def tell(self) -> int:
        return self._pos

    def _force_close(self) -> None:
        with self._rec.cond:
            self._forced = True
            self._rec.cond.notify_all()
        self.close()

    def close(self) -> None:
        if not self.closed:
            with self._volume._handles_lock:
                present = self in self._volume._readers
                self._volume._readers.discard(self)
            if present:
                self._volume._reader_closed(self._sb)
        super().close()

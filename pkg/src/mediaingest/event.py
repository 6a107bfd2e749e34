"""Typed events and the per-application publish/subscribe stream."""

from __future__ import annotations

import enum
import logging
import threading
import time
from collections import deque
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

from .context import Cancelled, Context

if TYPE_CHECKING:
    from .media.model import Fragment, Presentation, SwitchingSet, Track
    from .volume import VolumeFile

log = logging.getLogger(__name__)

DEFAULT_SUB_CAPACITY = 32


class ChannelClosed(Exception):
    pass


class Channel:
    """Bounded FIFO with Go channel semantics.

    ``capacity == 0`` gives rendezvous delivery: ``put`` returns only after
    a consumer has taken the item.
    """

    def __init__(self, capacity: int = 0) -> None:
        if capacity < 0:
            raise ValueError("capacity must be >= 0")
        self.capacity = capacity
        self._buf: deque = deque()
        self._cond = threading.Condition()
        self._closed = False
        self._sent = 0
        self._taken = 0

    def __len__(self) -> int:
        with self._cond:
            return len(self._buf)

    @property
    def closed(self) -> bool:
        return self._closed

    def _wake(self) -> None:
        with self._cond:
            self._cond.notify_all()

    def put(self, item: Any, ctx: Context | None = None) -> None:
        """Enqueue ``item``; raises ChannelClosed or Cancelled instead of blocking forever."""
        remove = ctx.on_cancel(self._wake) if ctx is not None else None
        try:
            with self._cond:
                limit = max(self.capacity, 1)
                while len(self._buf) >= limit:
                    self._raise_if_done(ctx)
                    self._cond.wait()
                self._raise_if_done(ctx)
                self._buf.append(item)
                self._sent += 1
                seq = self._sent
                self._cond.notify_all()
                if self.capacity == 0:
                    while self._taken < seq:
                        if self._closed:
                            raise ChannelClosed()
                        if ctx is not None and ctx.cancelled:
                            raise Cancelled()
                        self._cond.wait()
        finally:
            if remove is not None:
                remove()

    def _raise_if_done(self, ctx: Context | None) -> None:
        if self._closed:
            raise ChannelClosed()
        if ctx is not None and ctx.cancelled:
            raise Cancelled()

    def get(self, ctx: Context | None = None, timeout: float | None = None) -> Any:
        """Dequeue the next item.

        Buffered items are still returned after close; ChannelClosed is raised
        once the channel is closed and drained. Raises Cancelled when ``ctx``
        is cancelled and TimeoutError when ``timeout`` elapses.
        """
        remove = ctx.on_cancel(self._wake) if ctx is not None else None
        try:
            with self._cond:
                ok = self._cond.wait_for(
                    lambda: self._buf or self._closed or (ctx is not None and ctx.cancelled),
                    timeout,
                )
                if not ok:
                    raise TimeoutError()
                if ctx is not None and ctx.cancelled:
                    raise Cancelled()
                if not self._buf:
                    raise ChannelClosed()
                item = self._buf.popleft()
                self._taken += 1
                self._cond.notify_all()
                return item
        finally:
            if remove is not None:
                remove()

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    def __iter__(self):
        while True:
            try:
                yield self.get()
            except ChannelClosed:
                return


# event types


class FileEventType(enum.Enum):
    STARTED = "Started"
    COMMITTED = "Committed"
    ABORTED = "Aborted"
    DELETED = "Deleted"


class BoundaryEventType(enum.Enum):
    BEGIN = "Begin"
    END = "End"


class Event:
    """Base class of everything published on a stream."""

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError

    @property
    def type_name(self) -> str:
        raise NotImplementedError


def _file_dict(file: VolumeFile) -> dict[str, str]:
    return {"volume": file.volume.name, "path": str(file.path)}


@dataclass(frozen=True)
class FileEvent(Event):
    file: VolumeFile
    kind: FileEventType

    @property
    def type_name(self) -> str:
        return f"file.{self.kind.value.lower()}"

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "file": _file_dict(self.file)}


@dataclass(frozen=True)
class InitSegmentEvent(Event):
    file: VolumeFile
    track: Track
    kind: FileEventType

    def __post_init__(self) -> None:
        if self.kind is FileEventType.DELETED:
            raise ValueError("InitSegmentEvent has no Deleted kind")

    @property
    def type_name(self) -> str:
        return f"initsegment.{self.kind.value.lower()}"

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "file": _file_dict(self.file), "track": self.track.to_dict()}


@dataclass(frozen=True)
class FragmentEvent(Event):
    file: VolumeFile
    fragment: Fragment
    track: Track
    kind: FileEventType

    def __post_init__(self) -> None:
        if self.kind is FileEventType.DELETED:
            raise ValueError("FragmentEvent has no Deleted kind")

    @property
    def type_name(self) -> str:
        return f"fragment.{self.kind.value.lower()}"

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "file": _file_dict(self.file),
            "track": self.track.to_dict(),
            "fragment": self.fragment.to_dict(),
        }


@dataclass(frozen=True)
class StreamEvent(Event):
    stream: Presentation
    kind: BoundaryEventType

    @property
    def type_name(self) -> str:
        return f"stream.{self.kind.value.lower()}"

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "stream": {"id": self.stream.id}}


@dataclass(frozen=True)
class SwitchingSetEvent(Event):
    switching_set: SwitchingSet
    kind: BoundaryEventType

    @property
    def type_name(self) -> str:
        return f"switchingset.{self.kind.value.lower()}"

    def to_dict(self) -> dict[str, Any]:
        ss = self.switching_set
        return {"kind": self.kind.value, "switchingSet": {"id": ss.id, "stream": ss.presentation.id}}


@dataclass(frozen=True)
class TrackEvent(Event):
    track: Track
    kind: BoundaryEventType

    @property
    def type_name(self) -> str:
        return f"track.{self.kind.value.lower()}"

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "track": self.track.to_dict()}


def event_subject(e: Event) -> str | None:
    """Path-like subject of an event, when it has one."""
    file = getattr(e, "file", None)
    if file is not None:
        return str(file.path)
    if isinstance(e, StreamEvent):
        return e.stream.id
    if isinstance(e, SwitchingSetEvent):
        return f"{e.switching_set.presentation.id}/{e.switching_set.id}"
    if isinstance(e, TrackEvent):
        return e.track.path_prefix
    return None


# stream


class StreamStateError(Exception):
    pass


class Subscription:
    def __init__(self, capacity: int) -> None:
        self.channel = Channel(capacity)

    @property
    def capacity(self) -> int:
        return self.channel.capacity

    @property
    def active(self) -> bool:
        return not self.channel.closed

    def get(self, ctx: Context | None = None, timeout: float | None = None) -> Event:
        return self.channel.get(ctx, timeout)

    def __len__(self) -> int:
        return len(self.channel)


class ChannelStream:
    """In-memory event stream with one dispatcher thread fanning out to subscribers.

    Delivery is lossless: the dispatcher waits on a subscriber whose queue is
    full, which in turn applies backpressure to publishers.
    """

    def __init__(self, name: str = "stream", buffer: int = DEFAULT_SUB_CAPACITY) -> None:
        self.name = name
        self._rec = Channel(buffer)
        self._subs: list[Subscription] = []
        self._lock = threading.Lock()
        self._thread: threading.Thread | None = None
        self._ctx: Context | None = None
        self._stopped = False
        self._pending = 0  # published but not yet fanned out

    @property
    def running(self) -> bool:
        return self._thread is not None and not self._stopped

    def start(self, ctx: Context | None = None) -> None:
        with self._lock:
            if self._thread is not None:
                raise StreamStateError(f"stream {self.name!r} already started")
            self._ctx = ctx.child() if ctx is not None else Context()
            self._thread = threading.Thread(target=self._run, name=f"mi-stream-{self.name}", daemon=True)
            self._thread.start()

    def stop(self, timeout: float | None = 5.0) -> None:
        if self._ctx is not None:
            self._ctx.cancel("stream stopped")
        if self._thread is not None and self._thread is not threading.current_thread():
            self._thread.join(timeout)

    def _run(self) -> None:
        ctx = self._ctx
        try:
            while True:
                try:
                    e = self._rec.get(ctx)
                except (Cancelled, ChannelClosed):
                    return
                with self._lock:
                    subs = list(self._subs)
                for s in subs:
                    try:
                        s.channel.put(e, ctx)
                    except ChannelClosed:
                        # desubscribed while we were delivering
                        continue
                    except Cancelled:
                        return
                with self._lock:
                    self._pending -= 1
        finally:
            with self._lock:
                self._stopped = True
                subs, self._subs = self._subs, []
            self._rec.close()
            for s in subs:
                s.channel.close()

    def idle(self) -> bool:
        """No event is queued or being fanned out, and every subscriber queue is empty."""
        with self._lock:
            subs = list(self._subs)
            pending = self._pending
        return pending == 0 and all(len(s) == 0 for s in subs)

    def wait_idle(self, timeout: float, poll: float = 0.01) -> bool:
        deadline = time.monotonic() + timeout
        while not self.idle():
            if self._stopped or time.monotonic() >= deadline:
                return self.idle()
            time.sleep(poll)
        return True

    def pub(self, e: Event) -> None:
        if self._thread is None:
            raise StreamStateError(f"stream {self.name!r} not started")
        if self._stopped:
            raise StreamStateError(f"stream {self.name!r} stopped")
        with self._lock:
            self._pending += 1
        try:
            self._rec.put(e, self._ctx)
        except (Cancelled, ChannelClosed):
            with self._lock:
                self._pending -= 1
            raise StreamStateError(f"stream {self.name!r} stopped") from None

    def sub(self) -> Subscription:
        return self.sub_buf(DEFAULT_SUB_CAPACITY)

    def sub_buf(self, n: int) -> Subscription:
        if n < 0:
            raise ValueError("buffer length must be >= 0")
        s = Subscription(n)
        with self._lock:
            if self._stopped:
                s.channel.close()
            else:
                self._subs.append(s)
        return s

    def desub(self, s: Subscription) -> None:
        with self._lock:
            try:
                self._subs.remove(s)
            except ValueError:
                if not self._stopped:
                    raise KeyError("unknown subscription") from None
        s.channel.close()

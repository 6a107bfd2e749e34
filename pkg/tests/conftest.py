from __future__ import annotations

import contextlib
import threading
import time

import pytest

from mediaingest.config import parse_config, validate_config
from mediaingest.context import Cancelled, Context
from mediaingest.controller import System, live_threads
from mediaingest.event import ChannelClosed, ChannelStream
from mediaingest.volume import FsVolume, MemVolume, NullVolume

BACKENDS = ["null", "mem", "fs"]


def make_volume(kind: str, tmp_path, **kw):
    if kind == "null":
        v = NullVolume("nullVol")
    elif kind == "mem":
        v = MemVolume("memVol", **kw)
    else:
        v = FsVolume("fsVol", str(tmp_path / "fsroot"))
    v.init()
    return v


@pytest.fixture(params=BACKENDS)
def volume(request, tmp_path):
    v = make_volume(request.param, tmp_path)
    yield v
    v.finalize()


@pytest.fixture(params=["mem", "fs"])
def real_volume(request, tmp_path):
    """Backends that actually store bytes."""
    v = make_volume(request.param, tmp_path)
    yield v
    v.finalize()


class EventRecorder:
    """Collects every event of a stream on a background thread."""

    def __init__(self, stream: ChannelStream) -> None:
        self.stream = stream
        self.events: list = []
        self._sub = stream.sub_buf(1024)
        self._ctx = Context()
        self._thread = threading.Thread(target=self._run, name="test-recorder", daemon=True)
        self._thread.start()

    def _run(self) -> None:
        while True:
            try:
                self.events.append(self._sub.get(self._ctx))
            except (Cancelled, ChannelClosed):
                return

    def wait_for(self, pred, timeout: float = 10.0) -> bool:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if pred(self.events):
                return True
            time.sleep(0.01)
        return pred(self.events)

    def of(self, cls, kind=None) -> list:
        return [e for e in self.events if isinstance(e, cls) and (kind is None or e.kind is kind)]

    def close(self) -> None:
        self._ctx.cancel()
        self._thread.join(5)


def wait_until(pred, timeout: float = 10.0, step: float = 0.01) -> bool:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if pred():
            return True
        time.sleep(step)
    return bool(pred())


@contextlib.contextmanager
def running_system(text: str, drain_timeout: float = 30.0):
    cfg = parse_config(text)
    assert validate_config(cfg) == []
    system = System(cfg, drain_timeout=drain_timeout)
    system.start()
    try:
        yield system
    finally:
        system.stop()


def server_url(system: System, index: int = 0) -> str:
    return system.servers[index].url


@pytest.fixture(autouse=True)
def _no_leaked_threads():
    yield
    # every runtime thread must be gone once a test has cleaned up
    assert wait_until(lambda: not live_threads(), timeout=10), [t.name for t in live_threads()]


class _SlowWriter:
    def __init__(self, w, delay: float) -> None:
        self._w = w
        self._delay = delay

    def __getattr__(self, name):
        return getattr(self._w, name)

    def fileno(self):
        raise OSError("no descriptor")  # force the read/write copy loop

    def write(self, data):
        time.sleep(self._delay)
        return self._w.write(data)


class _SlowFile:
    def __init__(self, f, delay: float) -> None:
        self._f = f
        self._delay = delay

    def __getattr__(self, name):
        return getattr(self._f, name)

    def writer(self, in_place: bool):
        return _SlowWriter(self._f.writer(in_place), self._delay)


@contextlib.contextmanager
def slow_writes(volume, delay: float):
    """Every write through files opened with open_create sleeps first."""
    original = volume.open_create
    volume.open_create = lambda path: _SlowFile(original(path), delay)
    try:
        yield volume
    finally:
        del volume.open_create


# acceptance reporting: one pass/fail line per criterion

_criteria: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and report.passed):
        return
    number, title = marker.args
    if report.when == "call" or report.failed:
        status = "PASS" if report.passed else "FAIL"
        if number not in _criteria or status == "FAIL":
            _criteria[number] = (status, title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        status, title = _criteria[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {title}")

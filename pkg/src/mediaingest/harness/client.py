"""HTTP ingest clients for both ingest interfaces."""

from __future__ import annotations

import time
from typing import Any, Iterable, Iterator, Mapping

import requests

from .synth import SynthTrack


def _paced(pieces: Iterable[bytes], rate: float | None, stats: dict[str, Any]) -> Iterator[bytes]:
    """Yield pieces, sleeping so the average throughput stays at ``rate`` bytes/s."""
    start = time.monotonic()
    for piece in pieces:
        if rate:
            due = start + stats["bytes_sent"] / rate
            delay = due - time.monotonic()
            if delay > 0:
                time.sleep(delay)
        stats["bytes_sent"] += len(piece)
        stats["chunks_sent"] += 1
        yield piece


def push_interface1(url: str, stream: SynthTrack | Iterable[bytes], rate: float | None = None,
                    method: str = "PUT", timeout: float = 60.0,
                    session: requests.Session | None = None) -> dict[str, Any]:
    """One long-running request with chunked transfer encoding.

    A SynthTrack is sent as its header followed by one CMAF chunk per HTTP chunk.
    """
    pieces = stream.iter_wire_chunks() if isinstance(stream, SynthTrack) else stream
    stats: dict[str, Any] = {"bytes_sent": 0, "chunks_sent": 0}
    report: dict[str, Any] = {"url": url, "method": method, "status": None, "error": None}
    if isinstance(stream, SynthTrack):
        report["fragments"] = stream.fragment_count
    http = session or requests
    t0 = time.monotonic()
    try:
        r = http.request(method, url, data=_paced(pieces, rate, stats), timeout=timeout)
        report["status"] = r.status_code
        report["body"] = r.text[:200]
    except requests.RequestException as e:
        report["error"] = str(e)
    report["elapsed_s"] = round(time.monotonic() - t0, 4)
    report.update(stats)
    report["ok"] = report["error"] is None and report["status"] is not None and 200 <= report["status"] < 300
    return report


def push_interface2(base_url: str, files: Mapping[str, bytes] | Iterable[tuple[str, bytes]],
                    method: str = "PUT", timeout: float = 60.0,
                    session: requests.Session | None = None) -> dict[str, Any]:
    """One request per file, in the given order."""
    items = files.items() if isinstance(files, Mapping) else files
    http = session or requests
    results = []
    t0 = time.monotonic()
    for path, data in items:
        url = base_url.rstrip("/") + "/" + path.lstrip("/")
        entry: dict[str, Any] = {"path": path, "url": url, "bytes": len(data), "status": None, "error": None}
        t1 = time.monotonic()
        try:
            entry["status"] = http.request(method, url, data=data, timeout=timeout).status_code
        except requests.RequestException as e:
            entry["error"] = str(e)
        entry["elapsed_s"] = round(time.monotonic() - t1, 4)
        results.append(entry)
    return {
        "base_url": base_url,
        "requests": results,
        "elapsed_s": round(time.monotonic() - t0, 4),
        "ok": all(r["error"] is None and 200 <= (r["status"] or 0) < 300 for r in results),
    }


def delete_interface2(url: str, timeout: float = 30.0, session: requests.Session | None = None) -> dict[str, Any]:
    http = session or requests
    report: dict[str, Any] = {"url": url, "status": None, "error": None}
    t0 = time.monotonic()
    try:
        report["status"] = http.delete(url, timeout=timeout).status_code
    except requests.RequestException as e:
        report["error"] = str(e)
    report["elapsed_s"] = round(time.monotonic() - t0, 4)
    report["ok"] = report["error"] is None and report["status"] is not None and 200 <= report["status"] < 300
    return report

"""Serve ingested files from an ordered list of volumes."""

from __future__ import annotations

import hashlib
import os
import re
from email.utils import format_datetime
from typing import Iterator

from ..config import AppCfg
from ..runtime import ExecContext
from ..server import Request, Response
from ..volume import FileReader, FsVolume, InvalidPathError, NotFoundError, Volume, VolumeFile, VolumePath
from .base import App

DEFAULT_CONTENT_TYPE = "application/octet-stream"
CONTENT_TYPES = {
    ".m3u8": "application/vnd.apple.mpegurl",
    ".mpd": "application/dash+xml",
    ".cmfv": "video/mp4",
    ".cmfa": "audio/mp4",
    ".mp4": "video/mp4",
    ".m4s": "video/iso.segment",
    ".m4v": "video/mp4",
    ".m4a": "audio/mp4",
}
SENDFILE_HEADERS = {"xSendfile": "X-Sendfile", "xAccelRedirect": "X-Accel-Redirect"}
READ_CHUNK = 64 * 1024

_RANGE_RE = re.compile(r"^\s*(\d*)\s*-\s*(\d*)\s*$")


class RangeNotSatisfiable(Exception):
    pass


def parse_range(header: str, size: int) -> tuple[int, int] | None:
    """First byte range of a ``Range`` header as inclusive (start, end).

    None means the header is unusable and the full body should be sent;
    RangeNotSatisfiable is raised when no byte of the range exists.
    """
    unit, _, spec = header.partition("=")
    if unit.strip().lower() != "bytes" or not spec:
        return None
    m = _RANGE_RE.match(spec.split(",")[0])
    if m is None:
        return None
    first, last = m.groups()
    if not first and not last:
        return None
    if not first:
        n = int(last)
        if n == 0:
            raise RangeNotSatisfiable()
        return max(0, size - n), size - 1
    start = int(first)
    if last and int(last) < start:
        return None
    if start >= size:
        raise RangeNotSatisfiable()
    end = int(last) if last else size - 1
    return start, min(end, size - 1)


def content_type(path: str, default: str) -> str:
    _, ext = os.path.splitext(path)
    return CONTENT_TYPES.get(ext.lower(), default)


def make_etag(size: int, reader: FileReader) -> str:
    stamp = reader.mod_time.timestamp()
    digest = hashlib.sha256(f"{size}:{stamp!r}".encode()).hexdigest()[:32]
    return f'"{digest}"'


def _window(reader: FileReader, start: int, length: int) -> Iterator[bytes]:
    try:
        if start:
            reader.seek(start)
        remaining = length
        while remaining > 0:
            data = reader.read(min(READ_CHUNK, remaining))
            if not data:
                return
            remaining -= len(data)
            yield data
    finally:
        reader.close()


def _live(reader: FileReader) -> Iterator[bytes]:
    try:
        while True:
            data = reader.read(READ_CHUNK)
            if not data:
                return
            yield data
    finally:
        reader.close()


class GenericServeApp(App):
    methods = ("GET", "HEAD")

    def __init__(self, cfg: AppCfg, ectx: ExecContext) -> None:
        super().__init__(cfg, ectx)
        self.ref_app_name = self.option("refAppName", "")
        self.volumes: list[Volume] = [ectx.volumes.lookup(n) for n in cfg.volumeRefs]
        self.default_content_type = self.option("defaultContentType", DEFAULT_CONTENT_TYPE)
        self.sendfile_mode = self.option("sendfileMode", "off")

    def routes(self):
        return [("GET", "/*", self.handle_get), ("HEAD", "/*", self.handle_get),
                ("*", "/*", self.method_not_allowed)]

    def resolve(self, path: str) -> tuple[Volume, VolumeFile]:
        """First volume in configured order that holds the file."""
        for vol in self.volumes:
            try:
                return vol, vol.open(path)
            except NotFoundError:
                continue
        raise NotFoundError(path)

    def handle_get(self, req: Request) -> Response:
        try:
            path = VolumePath(req.app_path)
            vol, f = self.resolve(path)
            reader = f.reader()
        except (InvalidPathError, NotFoundError):
            return Response.text(404)
        headers = [
            ("Content-Type", content_type(path, self.default_content_type)),
            ("Last-Modified", format_datetime(reader.mod_time, usegmt=True)),
        ]
        if reader.writer_active and not reader.write_done().is_set():
            # still being written in place: stream what arrives, chunked
            resp = Response(200, _live(reader), headers)
            resp.on_close.append(reader.close)
            return resp

        size = reader.size
        etag = make_etag(size, reader)
        headers += [("ETag", etag), ("Accept-Ranges", "bytes")]
        if etag in [t.strip() for t in req.headers.get("If-None-Match", "").split(",")]:
            reader.close()
            return Response(304, b"", headers)

        byte_range = None
        if "Range" in req.headers:
            try:
                byte_range = parse_range(req.headers["Range"], size)
            except RangeNotSatisfiable:
                reader.close()
                return Response(416, b"", headers + [("Content-Range", f"bytes */{size}")])

        header_name = SENDFILE_HEADERS.get(self.sendfile_mode)
        if header_name and byte_range is None and isinstance(vol, FsVolume):
            reader.close()
            resp = Response(200, b"", headers + [(header_name, vol.disk_path(path))])
            return resp

        if byte_range is None:
            start, length, status = 0, size, 200
        else:
            start, end = byte_range
            length, status = end - start + 1, 206
            headers.append(("Content-Range", f"bytes {start}-{end}/{size}"))
        headers.append(("Content-Length", str(length)))
        resp = Response(status, _window(reader, start, length), headers)
        resp.on_close.append(reader.close)
        return resp

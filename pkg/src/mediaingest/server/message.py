"""Request and response objects, including the chunked request body reader."""

from __future__ import annotations

import io
import secrets
from http import HTTPStatus
from typing import Callable, Iterable, Iterator
from urllib.parse import unquote, urlsplit

from ..context import Context
from .router import Route, normalize_host

MAX_CHUNK_LINE = 4096


class BadRequest(Exception):
    pass


class BodyReader(io.RawIOBase):
    """Request body over the connection: Content-Length bounded or chunked.

    ``read(n)`` returns as soon as any bytes are available, so a streaming
    consumer sees data with chunk granularity.
    """

    def __init__(self, rfile, length: int | None = None, chunked: bool = False) -> None:
        super().__init__()
        self._rfile = rfile
        self._chunked = chunked
        self._remaining = 0 if chunked else (length or 0)
        self._eof = not chunked and not length
        self.bytes_read = 0

    def readable(self) -> bool:
        return True

    @property
    def at_eof(self) -> bool:
        return self._eof

    def _read_some(self, n: int) -> bytes:
        read1 = getattr(self._rfile, "read1", None)
        data = read1(n) if read1 is not None else self._rfile.read(n)
        if not data:
            raise BadRequest("connection closed inside request body")
        return data

    def _next_chunk(self) -> None:
        line = self._rfile.readline(MAX_CHUNK_LINE)
        if not line.endswith(b"\n"):
            raise BadRequest("bad chunk size line")
        size_s = line.split(b";", 1)[0].strip()
        try:
            size = int(size_s, 16)
        except ValueError:
            raise BadRequest(f"bad chunk size {size_s!r}") from None
        if size < 0:
            raise BadRequest("negative chunk size")
        if size == 0:
            # trailers until the empty line
            while True:
                t = self._rfile.readline(MAX_CHUNK_LINE)
                if not t or t in (b"\r\n", b"\n"):
                    break
            self._eof = True
        self._remaining = size

    def read(self, size: int = -1) -> bytes:
        if size is None or size < 0:
            parts = []
            while True:
                d = self.read(1 << 16)
                if not d:
                    return b"".join(parts)
                parts.append(d)
        if self._eof or size == 0:
            return b""
        if self._chunked and self._remaining == 0:
            self._next_chunk()
            if self._eof:
                return b""
        data = self._read_some(min(size, self._remaining))
        self._remaining -= len(data)
        self.bytes_read += len(data)
        if self._remaining == 0:
            if self._chunked:
                if self._rfile.readline(MAX_CHUNK_LINE) not in (b"\r\n", b"\n"):
                    raise BadRequest("missing CRLF after chunk data")
            else:
                self._eof = True
        return data

    def readinto(self, b) -> int:
        data = self.read(len(b))
        b[: len(data)] = data
        return len(data)


class Request:
    def __init__(self, method: str, target: str, version: str, headers, body: BodyReader,
                 remote: tuple[str, int] | None = None, ctx: Context | None = None) -> None:
        self.method = method
        self.target = target
        parts = urlsplit(target)
        self.path = unquote(parts.path) or "/"
        self.query = parts.query
        self.version = version
        self.headers = headers
        self.body = body
        self.remote = remote
        self.ctx = ctx or Context()
        self.request_id = secrets.token_hex(16)
        self.host = normalize_host(headers.get("Host"))
        # set only by the root router, never from client input
        self.internally_redirected = False
        self.internal_path: str | None = None
        self.app_path = self.path
        self.route: Route | None = None


class Response:
    """Status, headers and a body of bytes or an iterable of byte chunks.

    Iterable bodies without a Content-Length are sent with chunked transfer
    encoding, one HTTP chunk per item.
    """

    def __init__(self, status: int, body: bytes | Iterable[bytes] | None = None,
                 headers: list[tuple[str, str]] | None = None) -> None:
        self.status = status
        self.body = body if body is not None else b""
        self.headers: list[tuple[str, str]] = list(headers or [])
        self.on_close: list[Callable[[], None]] = []

    def get_header(self, name: str) -> str | None:
        lname = name.lower()
        for k, v in self.headers:
            if k.lower() == lname:
                return v
        return None

    def set_header(self, name: str, value: str) -> None:
        lname = name.lower()
        self.headers = [(k, v) for k, v in self.headers if k.lower() != lname]
        self.headers.append((name, value))

    @classmethod
    def text(cls, status: int, message: str | None = None) -> Response:
        if message is None:
            message = HTTPStatus(status).phrase
        body = (message + "\n").encode("utf-8")
        return cls(status, body, [("Content-Type", "text/plain; charset=utf-8")])

    def close(self) -> None:
        close = getattr(self.body, "close", None)
        if close is not None and not isinstance(self.body, (bytes, bytearray)):
            close()
        for fn in self.on_close:
            fn()
        self.on_close = []


def stream_reader(reader, chunk_size: int = 64 * 1024) -> Iterator[bytes]:
    """Yield a volume reader's bytes as they become available; closes it."""
    try:
        while True:
            data = reader.read(chunk_size)
            if not data:
                return
            yield data
    finally:
        reader.close()

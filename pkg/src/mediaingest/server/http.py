"""HTTP/1.1 server with chunked request bodies and streaming responses."""

from __future__ import annotations

import abc
import logging
import socket
import socketserver
import threading
import time
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler
from typing import TYPE_CHECKING, Any, Callable

from ..context import Context
from .message import BadRequest, BodyReader, Request, Response
from .middleware import basic_auth_check, cors_apply, cors_preflight, is_preflight
from .router import INTERNAL_PREFIX, RegistrationError, Route, RouteTable

if TYPE_CHECKING:
    from ..config import AppCfg

log = logging.getLogger(__name__)

DEFAULT_IDLE_TIMEOUT = 75.0
DEFAULT_DRAIN_TIMEOUT = 30.0


class HttpApp(abc.ABC):
    """Anything that serves HTTP must expose its routes relative to its mount path."""

    name: str
    cfg: AppCfg

    @abc.abstractmethod
    def routes(self) -> list[tuple[str, str, Callable[[Request], Response]]]:
        """(method or "*", path or prefix ending in "/*", handler)."""


def join_mount(mount: str, path: str) -> str:
    mount = mount.rstrip("/")
    if not path.startswith("/"):
        path = "/" + path
    return (mount + path) if mount else path


# request handling


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "mediaingest"
    server: _TCPServer

    def setup(self) -> None:
        super().setup()
        # headers and body go out in separate writes; avoid the delayed-ACK stall
        self.connection.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.connection.settimeout(self.server.idle_timeout)
        self.server.track(self, "idle")

    def finish(self) -> None:
        try:
            super().finish()
        finally:
            self.server.untrack(self)

    def log_message(self, format: str, *args: Any) -> None:
        log.debug("%s " + format, self.address_string(), *args)

    def handle_one_request(self) -> None:
        self.server.set_state(self, "idle")
        try:
            self.raw_requestline = self.rfile.readline(65537)
        except (TimeoutError, OSError):
            self.close_connection = True
            return
        if len(self.raw_requestline) > 65536:
            self.requestline = self.request_version = self.command = ""
            self.send_error(HTTPStatus.REQUEST_URI_TOO_LONG)
            return
        if not self.raw_requestline:
            self.close_connection = True
            return
        self.server.set_state(self, "active")
        try:
            if not self.parse_request():
                return
            self._serve()
        finally:
            self.server.set_state(self, "idle")
            if self.server.draining:
                self.close_connection = True

    def _body_reader(self) -> BodyReader:
        te = self.headers.get("Transfer-Encoding", "")
        if te:
            codings = [c.strip().lower() for c in te.split(",")]
            if codings[-1] != "chunked":
                raise BadRequest(f"unsupported transfer coding {te!r}")
            return BodyReader(self.rfile, chunked=True)
        cl = self.headers.get("Content-Length")
        if cl is not None:
            if not cl.strip().isdigit():
                raise BadRequest("bad Content-Length")
            return BodyReader(self.rfile, length=int(cl))
        return BodyReader(self.rfile, length=0)

    def _serve(self) -> None:
        start = time.monotonic()
        try:
            body = self._body_reader()
        except BadRequest as e:
            self.close_connection = True
            req = Request(self.command, self.path, self.request_version, self.headers, BodyReader(self.rfile))
            self._finish(req, Response.text(400, str(e)), start)
            return
        req = Request(self.command, self.path, self.request_version, self.headers, body,
                      self.client_address, self.server.ctx)
        try:
            resp = self.server.dispatch(req)
        except BadRequest as e:
            self.close_connection = True
            resp = Response.text(400, str(e))
        except Exception:
            log.exception("handler failed id=%s", req.request_id)
            resp = Response.text(500)
        self._finish(req, resp, start)

    def _finish(self, req: Request, resp: Response, start: float) -> None:
        sent = 0
        status = resp.status
        try:
            sent = self._write_response(req, resp)
        except (BrokenPipeError, ConnectionResetError, TimeoutError, OSError) as e:
            self.close_connection = True
            log.debug("response aborted id=%s: %s", req.request_id, e)
        except Exception:
            self.close_connection = True
            log.exception("response stream failed id=%s", req.request_id)
        finally:
            resp.close()
        if not req.body.at_eof:
            # unread request body would desynchronise the connection
            self.close_connection = True
        log.info("request id=%s method=%s host=%s path=%s status=%d bytes=%d duration_ms=%.1f",
                 req.request_id, req.method, req.host or "-", req.path, status, sent,
                 (time.monotonic() - start) * 1000)

    def _write_response(self, req: Request, resp: Response) -> int:
        head = req.method == "HEAD"
        body = resp.body
        chunked = False
        if isinstance(body, (bytes, bytearray)):
            if resp.get_header("Content-Length") is None and not (100 <= resp.status < 200 or resp.status in (204, 304)):
                resp.set_header("Content-Length", str(len(body)))
        elif resp.get_header("Content-Length") is None:
            if self.request_version == "HTTP/1.1":
                resp.set_header("Transfer-Encoding", "chunked")
                chunked = True
            else:
                self.close_connection = True
        resp.set_header("X-Request-Id", req.request_id)
        if self.close_connection or self.server.draining or not req.body.at_eof:
            resp.set_header("Connection", "close")
            self.close_connection = True
        self.send_response(resp.status)
        for k, v in resp.headers:
            self.send_header(k, v)
        self.end_headers()
        self.wfile.flush()
        if head:
            return 0
        if isinstance(body, (bytes, bytearray)):
            self.wfile.write(body)
            return len(body)
        sent = 0
        for piece in body:
            if not piece:
                continue
            if chunked:
                self.wfile.write(b"%x\r\n%s\r\n" % (len(piece), piece))
            else:
                self.wfile.write(piece)
            sent += len(piece)
        if chunked:
            self.wfile.write(b"0\r\n\r\n")
        return sent


class _TCPServer(socketserver.TCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, owner: HttpServer, address: tuple[str, int], idle_timeout: float) -> None:
        self.owner = owner
        self.idle_timeout = idle_timeout
        self.draining = False
        self.ctx = owner.ctx
        self._conns: dict[_Handler, str] = {}
        self._threads: set[threading.Thread] = set()
        self._cond = threading.Condition()
        family = socket.AF_INET6 if ":" in address[0] else socket.AF_INET
        self.address_family = family
        super().__init__(address, _Handler)

    def dispatch(self, req: Request) -> Response:
        return self.owner.dispatch(req)

    def process_request(self, request, client_address) -> None:
        t = threading.Thread(target=self._process, args=(request, client_address),
                             name=f"mi-http-{self.owner.name}-conn", daemon=True)
        with self._cond:
            self._threads.add(t)
        t.start()

    def _process(self, request, client_address) -> None:
        try:
            self.finish_request(request, client_address)
        except Exception:
            self.handle_error(request, client_address)
        finally:
            self.shutdown_request(request)
            with self._cond:
                self._threads.discard(threading.current_thread())
                self._cond.notify_all()

    def handle_error(self, request, client_address) -> None:
        log.debug("connection error from %s", client_address, exc_info=True)

    def track(self, h: _Handler, state: str) -> None:
        with self._cond:
            self._conns[h] = state
        if self.draining:
            self._kick(h)

    def untrack(self, h: _Handler) -> None:
        with self._cond:
            self._conns.pop(h, None)
            self._cond.notify_all()

    def set_state(self, h: _Handler, state: str) -> None:
        with self._cond:
            if h in self._conns:
                self._conns[h] = state
            self._cond.notify_all()

    @staticmethod
    def _kick(h: _Handler) -> None:
        try:
            h.connection.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass

    def drain(self, timeout: float) -> bool:
        """Close idle connections, wait for in-flight requests, force the rest.

        Returns True when every request finished within ``timeout``.
        """
        deadline = time.monotonic() + timeout
        with self._cond:
            self.draining = True
        clean = True
        while True:
            with self._cond:
                idle = [h for h, s in self._conns.items() if s == "idle"]
                active = [h for h, s in self._conns.items() if s == "active"]
            for h in idle:
                self._kick(h)
            if not active:
                break
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                clean = False
                log.warning("drain budget exhausted, closing %d active connection(s)", len(active))
                for h in active:
                    self._kick(h)
                break
            with self._cond:
                self._cond.wait(min(remaining, 0.1))
        with self._cond:
            threads = list(self._threads)
        for t in threads:
            t.join(max(0.0, deadline - time.monotonic()) + 5.0)
        return clean


class HttpServer:
    """Hosts applications; routes by host pattern, then method and path."""

    def __init__(self, name: str, address: tuple[str, int], idle_timeout: float = DEFAULT_IDLE_TIMEOUT,
                 drain_timeout: float = DEFAULT_DRAIN_TIMEOUT, ctx: Context | None = None) -> None:
        self.name = name
        self.ctx = ctx or Context()
        self.table = RouteTable()
        self.idle_timeout = idle_timeout
        self.drain_timeout = drain_timeout
        self.apps: list[HttpApp] = []
        self._server = _TCPServer(self, address, idle_timeout)
        self._thread: threading.Thread | None = None
        self._closed = False

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    @property
    def url(self) -> str:
        host, port = self.address
        if host in ("0.0.0.0", "", "::"):
            host = "127.0.0.1"
        return f"http://{host}:{port}"

    def register_app(self, app: object) -> None:
        if self._thread is not None:
            raise RegistrationError("cannot register applications while listening")
        if not isinstance(app, HttpApp):
            raise RegistrationError(f"{type(app).__name__} is not an HTTP application")
        cfg = app.cfg
        routes = [Route(method.upper() if method != "*" else "*", join_mount(cfg.mountPath, path), handler, app,
                        cfg.mountPath) for method, path, handler in app.routes()]
        entry = self.table.entry(cfg.hostPattern)
        for r in routes:
            entry.add(r)
        self.apps.append(app)

    # dispatch

    def dispatch(self, req: Request) -> Response:
        if req.path.startswith(INTERNAL_PREFIX):
            return host_route_check(req) or Response.text(404)
        preflight = is_preflight(req)
        for entry in self.table.candidates(req.host):
            req.internally_redirected = True
            req.internal_path = entry.internal_path + req.path
            resolved = self.table.resolve_internal(req.internal_path)
            if resolved is None:
                continue
            entry, path = resolved
            route = entry.lookup(req.method, path)
            if preflight and (route is None or route.method == "*"):
                wanted = req.headers.get("Access-Control-Request-Method", "").upper()
                target = entry.lookup(wanted, path)
                if target is not None and getattr(target.app, "cfg", None) is not None and target.app.cfg.cors:
                    route = target
            if route is None:
                continue
            return self._host_chain(req, route, path, preflight)
        return deny(req)

    def _host_chain(self, req: Request, route: Route, path: str, preflight: bool) -> Response:
        denied = host_route_check(req)
        if denied is not None:
            return denied
        cfg = route.app.cfg
        if preflight and cfg.cors is not None:
            return cors_preflight(req, cfg.cors)
        if cfg.auth is not None:
            resp = basic_auth_check(req, cfg.auth)
            if resp is not None:
                return resp
        req.route = route
        mount = route.mount.rstrip("/")
        req.app_path = path[len(mount):] or "/"
        resp = route.handler(req)
        if cfg.cors is not None:
            cors_apply(req, resp, cfg.cors)
        return resp

    # lifecycle

    def start(self) -> None:
        self.table.freeze()
        self._thread = threading.Thread(target=self._server.serve_forever, kwargs={"poll_interval": 0.1},
                                        name=f"mi-http-{self.name}", daemon=True)
        self._thread.start()
        log.info("server listening name=%s address=%s:%d", self.name, *self.address)

    def stop(self, drain_timeout: float | None = None) -> bool:
        if self._closed:
            return True
        self._closed = True
        if self._thread is not None:
            self._server.shutdown()
            self._thread.join()
        self._server.socket.close()
        clean = self._server.drain(self.drain_timeout if drain_timeout is None else drain_timeout)
        self._server.server_close()
        log.info("server stopped name=%s clean=%s", self.name, clean)
        return clean

    def serve(self, ctx: Context) -> None:
        """Listen until ``ctx`` is cancelled, then drain."""
        if self._thread is None:
            self.start()
        ctx.wait()
        self.stop()


def host_route_check(req: Request) -> Response | None:
    """Internal paths are only reachable through the root router's redirect."""
    if not req.internally_redirected:
        return Response.text(404)
    return None


def deny(req: Request) -> Response:
    return Response.text(404)

"""Ingest of client-packaged DASH/HLS presentations, stored verbatim."""

from __future__ import annotations

from ..config import AppCfg
from ..event import FileEvent, FileEventType
from ..runtime import ExecContext
from ..server import BadRequest, Request, Response
from ..volume import InvalidPathError, NotFoundError, VolumeError, VolumePath, WriterExistsError
from .base import App

DEFAULT_MAX_FILE_BYTES = 64 << 20
COPY_CHUNK = 64 * 1024


class DashHlsIngestApp(App):
    methods = ("POST", "PUT", "DELETE")

    def __init__(self, cfg: AppCfg, ectx: ExecContext) -> None:
        super().__init__(cfg, ectx)
        self.volume = ectx.volumes.lookup(cfg.volumeRefs[0])
        self.in_place = bool(self.option("useInPlaceWriters", False))
        self.max_file_bytes = int(self.option("maxFileBytes", DEFAULT_MAX_FILE_BYTES))

    def routes(self):
        return [("POST", "/*", self.handle_put_post), ("PUT", "/*", self.handle_put_post),
                ("DELETE", "/*", self.handle_delete), ("*", "/*", self.method_not_allowed)]

    def _path(self, req: Request) -> VolumePath | Response:
        try:
            return VolumePath(req.app_path)
        except InvalidPathError as e:
            return Response.text(400, str(e))

    def handle_put_post(self, req: Request) -> Response:
        path = self._path(req)
        if isinstance(path, Response):
            return path
        declared = req.headers.get("Content-Length")
        if declared is not None and declared.isdigit() and int(declared) > self.max_file_bytes:
            return Response.text(413, f"file exceeds {self.max_file_bytes} bytes")
        existed = self.volume.exists(path)
        try:
            f = self.volume.open_create(path)
            w = f.writer(self.in_place)
        except WriterExistsError:
            return Response.text(409, f"{path} is being written by another request")
        except VolumeError as e:
            return Response.text(500, str(e))
        self.ectx.publish(FileEvent(f, FileEventType.STARTED))
        status, message = 0, ""
        try:
            while True:
                data = req.body.read(COPY_CHUNK)
                if not data:
                    break
                if w.bytes_written + len(data) > self.max_file_bytes:
                    status, message = 413, f"file exceeds {self.max_file_bytes} bytes"
                    break
                w.write(data)
        except (BadRequest, OSError) as e:
            status, message = 400, f"request body: {e}"
        if status:
            w.abort()
            if not existed:
                try:
                    self.volume.delete(path)
                except VolumeError:
                    pass
            self.ectx.publish(FileEvent(f, FileEventType.ABORTED))
            return Response.text(status, message)
        w.commit()
        self.ectx.publish(FileEvent(f, FileEventType.COMMITTED))
        return Response(200 if existed else 201)

    def handle_delete(self, req: Request) -> Response:
        path = self._path(req)
        if isinstance(path, Response):
            return path
        try:
            f = self.volume.open(path)
            self.volume.delete(path)
        except NotFoundError:
            return Response.text(404)
        except WriterExistsError:
            return Response.text(409, f"{path} is being written")
        self.ectx.publish(FileEvent(f, FileEventType.DELETED))
        return Response(204)

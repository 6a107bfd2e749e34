"""CMAF track ingest over long-running POST/PUT requests.

The request body is a CMAF header followed by CMAF chunks. The header is
stored as ``<presentation>/<switching set>/<track>/init`` and every fragment
as ``.../<10-digit sequence number>``; fragments are written in place so
they can be served while they grow.
"""

from __future__ import annotations

import re
import threading
import time
from dataclasses import dataclass

from ..config import AppCfg
from ..context import Context
from ..event import (
    BoundaryEventType,
    FileEvent,
    FileEventType,
    FragmentEvent,
    InitSegmentEvent,
    StreamEvent,
    SwitchingSetEvent,
    TrackEvent,
)
from ..media import (
    Fragment,
    MediaError,
    Presentation,
    PresentationState,
    SizeLimitError,
    SwitchingSet,
    Track,
    is_fragment_boundary,
    read_cmaf_header,
    scan_chunk,
)
from ..runtime import ExecContext
from ..server import BadRequest, Request, Response
from ..volume import FileWriter, InvalidPathError, VolumeError, VolumeFile, VolumePath, WriterExistsError
from .base import App

DEFAULT_MAX_HEADER_BYTES = 1 << 20
DEFAULT_MAX_FRAGMENT_BYTES = 64 << 20
DEFAULT_PRESENTATION_TIMEOUT_MS = 60_000
DEFAULT_GC_INTERVAL_MS = 10_000

_KEYWORD_RE = re.compile(r"^(Switching|Stream)\((.*)\)$")
_MANIFEST_EXTENSIONS = (".m3u8", ".mpd")


class IngestPathError(ValueError):
    pass


class UnsupportedSignalingError(Exception):
    """Switching-set signaling through manifests or kind boxes."""


@dataclass(frozen=True)
class IngestAddress:
    presentation_id: str
    switching_set_id: str
    track_id: str


def _check_segment(seg: str, what: str) -> None:
    if not seg:
        raise IngestPathError(f"empty {what}")
    try:
        VolumePath(seg)
    except InvalidPathError as e:
        raise IngestPathError(f"invalid {what} {seg!r}: {e}") from None
    if "/" in seg:
        raise IngestPathError(f"invalid {what} {seg!r}")


def parse_ingest_path(path: str) -> IngestAddress:
    """Split ``/<presentation...>/Switching(<ss>)/Stream(<track>)``."""
    segments = [s for s in path.split("/") if s]
    if segments and segments[-1].lower().endswith(_MANIFEST_EXTENSIONS) \
            and not any(_KEYWORD_RE.match(s) for s in segments):
        raise UnsupportedSignalingError("switching set signaling through manifests is not supported")
    idx = next((i for i, s in enumerate(segments) if s.startswith("Switching(")), None)
    if idx is None:
        raise IngestPathError("path lacks a Switching(...) segment")
    if idx + 1 >= len(segments) or not segments[idx + 1].startswith("Stream("):
        raise IngestPathError("Switching(...) must be followed by a Stream(...) segment")
    if idx + 2 != len(segments):
        raise IngestPathError("no segments may follow Stream(...)")
    pres = segments[:idx]
    if not pres:
        raise IngestPathError("empty presentation prefix")
    for s in pres:
        if _KEYWORD_RE.match(s):
            raise IngestPathError(f"unexpected keyword segment {s!r}")
        _check_segment(s, "presentation segment")
    m_ss = _KEYWORD_RE.match(segments[idx])
    m_tr = _KEYWORD_RE.match(segments[idx + 1])
    if m_ss is None or m_tr is None:
        raise IngestPathError("malformed keyword segment")
    _check_segment(m_ss.group(2), "switching set id")
    _check_segment(m_tr.group(2), "track id")
    return IngestAddress("/".join(pres), m_ss.group(2), m_tr.group(2))


def fragment_path(track: Track, seq: int) -> str:
    return f"{track.path_prefix}/{seq:010d}"


def header_path(track: Track) -> str:
    return f"{track.path_prefix}/init"


class _IngestFailure(Exception):
    def __init__(self, status: int, message: str) -> None:
        super().__init__(message)
        self.status = status


class CmafIngestApp(App):
    methods = ("POST", "PUT")

    def __init__(self, cfg: AppCfg, ectx: ExecContext) -> None:
        super().__init__(cfg, ectx)
        self.volume = ectx.volumes.lookup(cfg.volumeRefs[0])
        self.max_header_bytes = int(self.option("maxHeaderBytes", DEFAULT_MAX_HEADER_BYTES))
        self.max_fragment_bytes = int(self.option("maxFragmentBytes", DEFAULT_MAX_FRAGMENT_BYTES))
        self.presentation_timeout = self.duration_option("presentationTimeout", DEFAULT_PRESENTATION_TIMEOUT_MS)
        self.gc_interval = self.duration_option("gcInterval", DEFAULT_GC_INTERVAL_MS)
        self.presentations: dict[str, Presentation] = {}
        self._active: set[tuple[str, str, str]] = set()
        self._lock = threading.Lock()
        self._begin_lock = threading.Lock()
        self._gc_thread: threading.Thread | None = None
        self._ctx: Context | None = None

    def routes(self):
        return [("POST", "/*", self.handle_ingest), ("PUT", "/*", self.handle_ingest),
                ("*", "/*", self.method_not_allowed)]

    # model bookkeeping

    def _acquire_track(self, addr: IngestAddress) -> tuple[Presentation, Track, list]:
        begins: list = []
        with self._lock:
            pres = self.presentations.get(addr.presentation_id)
            if pres is None:
                pres = Presentation(addr.presentation_id)
                self.presentations[pres.id] = pres
                begins.append(StreamEvent(pres, BoundaryEventType.BEGIN))
            ss = pres.switching_sets.get(addr.switching_set_id)
            if ss is None:
                ss = SwitchingSet(addr.switching_set_id, pres)
                pres.switching_sets[ss.id] = ss
                begins.append(SwitchingSetEvent(ss, BoundaryEventType.BEGIN))
            track = ss.tracks.get(addr.track_id)
            if track is None:
                track = Track(addr.track_id, ss)
                ss.tracks[track.id] = track
                begins.append(TrackEvent(track, BoundaryEventType.BEGIN))
            key = (pres.id, ss.id, track.id)
            if key in self._active:
                raise _IngestFailure(409, f"track {track.path_prefix} is already being ingested")
            self._active.add(key)
            pres.active_requests += 1
            pres.touch()
        return pres, track, begins

    def _release_track(self, pres: Presentation, track: Track) -> None:
        with self._lock:
            self._active.discard((pres.id, track.switching_set.id, track.id))
            pres.active_requests -= 1
            pres.touch()

    # ingest

    def handle_ingest(self, req: Request) -> Response:
        try:
            addr = parse_ingest_path(req.app_path)
        except UnsupportedSignalingError as e:
            return Response.text(501, str(e))
        except IngestPathError as e:
            return Response.text(400, str(e))
        # hold the ordering lock so parents' Begin events precede their children's
        with self._begin_lock:
            try:
                pres, track, begins = self._acquire_track(addr)
            except _IngestFailure as e:
                return Response.text(e.status, str(e))
            for ev in begins:
                self.ectx.publish(ev)
        try:
            self._ingest(req, pres, track)
        except _IngestFailure as e:
            self.log.warning("ingest failed id=%s track=%s status=%d: %s", req.request_id, track.path_prefix,
                             e.status, e)
            return Response.text(e.status, str(e))
        finally:
            self._release_track(pres, track)
        return Response(200)

    def _ingest(self, req: Request, pres: Presentation, track: Track) -> None:
        body = req.body
        try:
            header = read_cmaf_header(body, self.max_header_bytes)
        except SizeLimitError as e:
            raise _IngestFailure(413, str(e)) from None
        except (MediaError, BadRequest, OSError) as e:
            raise _IngestFailure(400, f"bad CMAF header: {e}") from None
        if header.has_kind_box:
            raise _IngestFailure(501, "switching set signaling through kind boxes is not supported")
        self._write_header(track, header)

        current: tuple[Fragment, FileWriter, VolumeFile] | None = None
        try:
            while True:
                try:
                    chunk = scan_chunk(body, header, self.max_fragment_bytes)
                except SizeLimitError:
                    raise _IngestFailure(413, f"fragment exceeds {self.max_fragment_bytes} bytes") from None
                except (MediaError, BadRequest, OSError) as e:
                    raise _IngestFailure(400, f"bad chunk stream: {e}") from None
                if chunk is None:
                    break
                try:
                    boundary = is_fragment_boundary(chunk, header)
                except MediaError as e:
                    raise _IngestFailure(400, str(e)) from None
                if current is None and not boundary:
                    raise _IngestFailure(400, "stream must start with a switching point")
                if boundary:
                    if current is not None:
                        done, current = current, None
                        self._commit_fragment(track, *done)
                    current = self._start_fragment(track, chunk.base_decode_time)
                frag, writer, _ = current
                if frag.size + len(chunk) > self.max_fragment_bytes:
                    raise _IngestFailure(413, f"fragment exceeds {self.max_fragment_bytes} bytes")
                writer.write(chunk.raw)
                frag.add_chunk(chunk)
                pres.touch()
            if current is not None:
                done, current = current, None
                self._commit_fragment(track, *done)
        except BaseException:
            if current is not None:
                self._abort_fragment(track, *current)
            raise

    def _write_header(self, track: Track, header) -> None:
        try:
            f = self.volume.open_create(header_path(track))
            w = f.writer(in_place=False)
        except WriterExistsError as e:
            raise _IngestFailure(409, str(e)) from None
        except VolumeError as e:
            raise _IngestFailure(500, str(e)) from None
        self.ectx.publish(FileEvent(f, FileEventType.STARTED))
        self.ectx.publish(InitSegmentEvent(f, track, FileEventType.STARTED))
        try:
            w.write(header.raw)
            w.commit()
        except Exception:
            if not w.closed:
                w.abort()
            self.ectx.publish(FileEvent(f, FileEventType.ABORTED))
            self.ectx.publish(InitSegmentEvent(f, track, FileEventType.ABORTED))
            raise
        with self._lock:
            track.header = header
            track.header_file = f
        self.ectx.publish(FileEvent(f, FileEventType.COMMITTED))
        self.ectx.publish(InitSegmentEvent(f, track, FileEventType.COMMITTED))

    def _start_fragment(self, track: Track, start_time: int) -> tuple[Fragment, FileWriter, VolumeFile]:
        with self._lock:
            seq = track.next_sequence
        try:
            f = self.volume.open_create(fragment_path(track, seq))
            w = f.writer(in_place=True)
        except WriterExistsError as e:
            raise _IngestFailure(409, str(e)) from None
        except VolumeError as e:
            raise _IngestFailure(500, str(e)) from None
        frag = Fragment(seq, start_time, file=f)
        self.ectx.publish(FileEvent(f, FileEventType.STARTED))
        self.ectx.publish(FragmentEvent(f, frag, track, FileEventType.STARTED))
        return frag, w, f

    def _commit_fragment(self, track: Track, frag: Fragment, w: FileWriter, f: VolumeFile) -> None:
        w.commit()
        with self._lock:
            track.fragments.append(frag)
            track.next_sequence = frag.sequence_number + 1
        self.ectx.publish(FileEvent(f, FileEventType.COMMITTED))
        self.ectx.publish(FragmentEvent(f, frag, track, FileEventType.COMMITTED))

    def _abort_fragment(self, track: Track, frag: Fragment, w: FileWriter, f: VolumeFile) -> None:
        if not w.closed:
            w.abort()
        try:
            # the slot was empty before; do not leave an empty file behind
            self.volume.delete(f.path)
        except VolumeError:
            pass
        self.ectx.publish(FileEvent(f, FileEventType.ABORTED))
        self.ectx.publish(FragmentEvent(f, frag, track, FileEventType.ABORTED))

    # presentation lifecycle

    def gc_presentations(self, now: float | None = None) -> list[str]:
        """Terminate presentations idle longer than the timeout; returns their ids."""
        now = time.monotonic() if now is None else now
        ended: list[Presentation] = []
        with self._lock:
            for pres in list(self.presentations.values()):
                if pres.active_requests == 0 and now - pres.last_activity > self.presentation_timeout:
                    pres.state = PresentationState.TERMINATED
                    del self.presentations[pres.id]
                    ended.append(pres)
        for pres in ended:
            for ss in pres.switching_sets.values():
                for track in ss.tracks.values():
                    self.ectx.publish(TrackEvent(track, BoundaryEventType.END))
                self.ectx.publish(SwitchingSetEvent(ss, BoundaryEventType.END))
            self.ectx.publish(StreamEvent(pres, BoundaryEventType.END))
            self.log.info("presentation terminated id=%s", pres.id)
        return [p.id for p in ended]

    def _gc_loop(self, ctx: Context) -> None:
        while not ctx.wait(self.gc_interval):
            try:
                self.gc_presentations()
            except Exception:
                self.log.exception("presentation gc failed")

    def start(self, ctx: Context) -> None:
        self._ctx = ctx
        self._gc_thread = threading.Thread(target=self._gc_loop, args=(ctx,), name=f"mi-app-{self.name}-gc",
                                           daemon=True)
        self._gc_thread.start()

    def stop(self) -> None:
        if self._ctx is not None:
            self._ctx.cancel("app stopped")
        if self._gc_thread is not None:
            self._gc_thread.join()

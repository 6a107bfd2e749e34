"""HLS playlist generation from CMAF ingest events.

Switching sets become groups, tracks become media playlists and committed
fragments become segments. Playlists are rewritten with snapshot writers,
so readers always see a complete file.
"""

from __future__ import annotations

import math
import posixpath
from dataclasses import dataclass, field

from ..config import FunctionCfg
from ..event import (
    BoundaryEventType,
    Event,
    FileEvent,
    FileEventType,
    FragmentEvent,
    InitSegmentEvent,
    StreamEvent,
)
from ..media import HandlerType, Track
from ..runtime import ExecContext
from .base import Function

HLS_VERSION = 6
# BANDWIDTH advertised before a track has a committed fragment
PLACEHOLDER_BANDWIDTH = 1


@dataclass
class HlsSegment:
    sequence: int
    uri: str
    path: str
    duration: float


@dataclass
class HlsTrack:
    id: str
    group_id: str
    kind: str
    playlist_path: str
    header_uri: str
    segments: list[HlsSegment] = field(default_factory=list)
    max_duration: float = 0.0
    bandwidth: int = PLACEHOLDER_BANDWIDTH
    ended: bool = False
    next_media_sequence: int = 1

    @property
    def media_sequence(self) -> int:
        return self.segments[0].sequence if self.segments else self.next_media_sequence


@dataclass
class HlsGroup:
    id: str
    kind: str
    tracks: dict[str, HlsTrack] = field(default_factory=dict)


@dataclass
class HlsPresentation:
    id: str
    groups: dict[str, HlsGroup] = field(default_factory=dict)

    @property
    def playlist_path(self) -> str:
        return f"{self.id}/index.m3u8"


def _fmt_duration(seconds: float) -> str:
    return f"{seconds:.5f}"


def render_media_playlist(t: HlsTrack) -> str:
    target = max(1, math.ceil(t.max_duration))
    lines = [
        "#EXTM3U",
        f"#EXT-X-VERSION:{HLS_VERSION}",
        f"#EXT-X-TARGETDURATION:{target}",
        f"#EXT-X-MEDIA-SEQUENCE:{t.media_sequence}",
        "#EXT-X-INDEPENDENT-SEGMENTS",
        f'#EXT-X-MAP:URI="{t.header_uri}"',
    ]
    for s in t.segments:
        lines.append(f"#EXTINF:{_fmt_duration(s.duration)},")
        lines.append(s.uri)
    if t.ended:
        lines.append("#EXT-X-ENDLIST")
    return "\n".join(lines) + "\n"


def render_multivariant_playlist(p: HlsPresentation) -> str:
    lines = ["#EXTM3U", f"#EXT-X-VERSION:{HLS_VERSION}", "#EXT-X-INDEPENDENT-SEGMENTS"]
    audio_groups = sorted((g for g in p.groups.values() if g.kind == "audio"), key=lambda g: g.id)
    video_groups = sorted((g for g in p.groups.values() if g.kind == "video"), key=lambda g: g.id)

    def rel(path: str) -> str:
        return posixpath.relpath(path, p.id)

    for g in audio_groups:
        for i, t in enumerate(sorted(g.tracks.values(), key=lambda t: t.id)):
            default = "YES" if i == 0 else "NO"
            lines.append(
                f'#EXT-X-MEDIA:TYPE=AUDIO,GROUP-ID="{g.id}",NAME="{t.id}",DEFAULT={default},'
                f'AUTOSELECT=YES,URI="{rel(t.playlist_path)}"')
    audio = audio_groups[0] if audio_groups else None
    audio_bw = max((t.bandwidth for t in audio.tracks.values()), default=0) if audio else 0
    if video_groups:
        for g in video_groups:
            for t in sorted(g.tracks.values(), key=lambda t: t.id):
                attrs = f"BANDWIDTH={t.bandwidth + audio_bw}"
                if audio is not None:
                    attrs += f',AUDIO="{audio.id}"'
                lines.append(f"#EXT-X-STREAM-INF:{attrs}")
                lines.append(rel(t.playlist_path))
    else:
        # audio only: every audio track is a variant of its own
        for g in audio_groups:
            for t in sorted(g.tracks.values(), key=lambda t: t.id):
                lines.append(f"#EXT-X-STREAM-INF:BANDWIDTH={t.bandwidth}")
                lines.append(rel(t.playlist_path))
    return "\n".join(lines) + "\n"


class ManifestFunction(Function):
    def __init__(self, cfg: FunctionCfg, ectx: ExecContext) -> None:
        super().__init__(cfg, ectx)
        ref = cfg.options.get("volumeRef")
        if ref is None:
            refs = ectx.app_cfg.volumeRefs if ectx.app_cfg is not None else []
            if not refs:
                raise ValueError(f"function {cfg.name!r} needs an output volume")
            ref = refs[0]
        self.volume = ectx.volumes.lookup(ref)
        self.presentations: dict[str, HlsPresentation] = {}
        self._by_segment_path: dict[str, tuple[HlsPresentation, HlsTrack]] = {}

    def _track(self, track: Track) -> tuple[HlsPresentation, HlsTrack] | None:
        p = self.presentations.get(track.switching_set.presentation.id)
        if p is None:
            return None
        g = p.groups.get(track.switching_set.id)
        if g is None or track.id not in g.tracks:
            return None
        return p, g.tracks[track.id]

    def handle(self, e: Event) -> None:
        if isinstance(e, StreamEvent):
            if e.kind is BoundaryEventType.BEGIN:
                self._drop(e.stream.id)
                self.presentations[e.stream.id] = HlsPresentation(e.stream.id)
            else:
                self._end(e.stream.id)
        elif isinstance(e, InitSegmentEvent) and e.kind is FileEventType.COMMITTED:
            self._on_header(e)
        elif isinstance(e, FragmentEvent) and e.kind is FileEventType.COMMITTED:
            self._on_fragment(e)
        elif isinstance(e, FileEvent) and e.kind is FileEventType.DELETED:
            self._on_deleted(e)

    def _drop(self, pres_id: str) -> None:
        self.presentations.pop(pres_id, None)
        for k in [k for k, (p, _) in self._by_segment_path.items() if p.id == pres_id]:
            del self._by_segment_path[k]

    def _on_header(self, e: InitSegmentEvent) -> None:
        track = e.track
        ss = track.switching_set
        pres = ss.presentation
        p = self.presentations.setdefault(pres.id, HlsPresentation(pres.id))
        header = track.header
        if header is None:
            self.log.warning("header event without header track=%s", track.path_prefix)
            return
        kind = "audio" if header.handler_type is HandlerType.AUDIO else "video"
        g = p.groups.get(ss.id)
        if g is None:
            g = p.groups[ss.id] = HlsGroup(ss.id, kind)
        ssdir = f"{pres.id}/{ss.id}"
        t = g.tracks.get(track.id)
        if t is None:
            t = g.tracks[track.id] = HlsTrack(
                id=track.id, group_id=ss.id, kind=kind,
                playlist_path=f"{ssdir}/{track.id}.m3u8",
                header_uri=posixpath.relpath(str(e.file.path), ssdir),
            )
        else:
            t.header_uri = posixpath.relpath(str(e.file.path), ssdir)
            t.ended = False
        self._write(p.playlist_path, render_multivariant_playlist(p))

    def _on_fragment(self, e: FragmentEvent) -> None:
        found = self._track(e.track)
        if found is None:
            self.log.warning("fragment for unknown track skipped track=%s", e.track.path_prefix)
            return
        p, t = found
        timescale = e.track.timescale
        if timescale <= 0 or e.fragment.duration <= 0:
            self.log.warning("fragment without duration skipped path=%s", e.file.path)
            return
        seconds = e.fragment.duration / timescale
        first = not t.segments and t.bandwidth == PLACEHOLDER_BANDWIDTH
        path = str(e.file.path)
        ssdir = f"{p.id}/{t.group_id}"
        t.segments.append(HlsSegment(e.fragment.sequence_number, posixpath.relpath(path, ssdir), path, seconds))
        t.max_duration = max(t.max_duration, seconds)
        t.bandwidth = max(1, math.ceil(e.fragment.size * 8 / seconds))
        self._by_segment_path[path] = (p, t)
        self._write(t.playlist_path, render_media_playlist(t))
        if first:
            self._write(p.playlist_path, render_multivariant_playlist(p))

    def _on_deleted(self, e: FileEvent) -> None:
        path = str(e.file.path)
        found = self._by_segment_path.pop(path, None)
        if found is None:
            return
        _, t = found
        before = len(t.segments)
        t.segments = [s for s in t.segments if s.path != path]
        if len(t.segments) != before:
            if not t.segments:
                t.next_media_sequence = max(t.next_media_sequence, self._seq_after(path))
            self._write(t.playlist_path, render_media_playlist(t))

    @staticmethod
    def _seq_after(path: str) -> int:
        name = posixpath.basename(path)
        return int(name) + 1 if name.isdigit() else 1

    def _end(self, pres_id: str) -> None:
        p = self.presentations.get(pres_id)
        if p is None:
            return
        for g in p.groups.values():
            for t in g.tracks.values():
                t.ended = True
                self._write(t.playlist_path, render_media_playlist(t))

    def _write(self, path: str, text: str) -> None:
        self.volume.write_all(path, text.encode("utf-8"), in_place=False)

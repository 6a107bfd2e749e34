"""CMAF object model: headers, chunks, fragments, tracks, switching sets, presentations."""

from __future__ import annotations

import enum
import threading
import time
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from ..volume import VolumeFile


class HandlerType(str, enum.Enum):
    VIDEO = "video"
    AUDIO = "audio"
    OTHER = "other"

    @classmethod
    def from_hdlr(cls, code: str) -> HandlerType:
        return {"vide": cls.VIDEO, "soun": cls.AUDIO}.get(code, cls.OTHER)


@dataclass(frozen=True)
class CmafHeader:
    raw: bytes
    track_id: int
    timescale: int
    handler_type: HandlerType
    brands: tuple[str, ...]
    # mvex/trex defaults, used when a fragment carries no duration or flags of its own
    default_sample_duration: int | None = None
    default_sample_flags: int | None = None
    has_kind_box: bool = False

    def metadata(self) -> tuple:
        return (self.track_id, self.timescale, self.handler_type, self.brands,
                self.default_sample_duration, self.default_sample_flags, self.has_kind_box)


@dataclass(frozen=True)
class Chunk:
    raw: bytes
    moof_offset: int
    moof_len: int
    mdat_offset: int
    mdat_len: int
    base_decode_time: int
    first_sample_is_sync: bool | None
    sample_count: int
    duration: int | None
    sequence_number: int = 0

    def __len__(self) -> int:
        return len(self.raw)


@dataclass
class Fragment:
    sequence_number: int
    start_time: int
    chunks: list[Chunk] = field(default_factory=list)
    duration: int = 0
    size: int = 0
    file: VolumeFile | None = None

    def add_chunk(self, c: Chunk) -> None:
        # keep metadata only; payload bytes live in the volume file
        self.chunks.append(Chunk(b"", c.moof_offset, c.moof_len, c.mdat_offset, c.mdat_len,
                                 c.base_decode_time, c.first_sample_is_sync, c.sample_count,
                                 c.duration, c.sequence_number))
        self.duration += c.duration or 0
        self.size += len(c.raw)

    def to_dict(self) -> dict[str, Any]:
        return {
            "sequenceNumber": self.sequence_number,
            "startTime": self.start_time,
            "duration": self.duration,
            "size": self.size,
            "chunks": len(self.chunks),
        }


@dataclass(eq=False)
class Track:
    id: str
    switching_set: SwitchingSet
    header: CmafHeader | None = None
    header_file: VolumeFile | None = None
    fragments: list[Fragment] = field(default_factory=list)
    next_sequence: int = 1

    @property
    def path_prefix(self) -> str:
        return f"{self.switching_set.presentation.id}/{self.switching_set.id}/{self.id}"

    @property
    def timescale(self) -> int:
        return self.header.timescale if self.header else 0

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "id": self.id,
            "switchingSet": self.switching_set.id,
            "stream": self.switching_set.presentation.id,
        }
        if self.header is not None:
            d.update(trackId=self.header.track_id, timescale=self.header.timescale,
                     handlerType=self.header.handler_type.value)
        return d


@dataclass(eq=False)
class SwitchingSet:
    id: str
    presentation: Presentation
    tracks: dict[str, Track] = field(default_factory=dict)


class PresentationState(str, enum.Enum):
    ACTIVE = "active"
    TERMINATED = "terminated"


@dataclass(eq=False)
class Presentation:
    id: str
    switching_sets: dict[str, SwitchingSet] = field(default_factory=dict)
    last_activity: float = field(default_factory=time.monotonic)
    state: PresentationState = PresentationState.ACTIVE
    active_requests: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def touch(self, now: float | None = None) -> None:
        self.last_activity = time.monotonic() if now is None else now

    def tracks(self) -> list[Track]:
        return [t for ss in self.switching_sets.values() for t in ss.tracks.values()]

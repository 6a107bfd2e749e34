"""Deterministic synthetic CMAF track muxer.

Produces structurally valid fragmented MP4 (ftyp + moov header, then
moof/mdat chunks) with dummy sample payloads, together with the list of
chunk indices that start a fragment. The payload is never decoded by the
server, so container validity is all that matters.
"""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass, field
from typing import Iterable, Literal

SYNC_SAMPLE_FLAGS = 0x02000000      # sample_depends_on = 2
NON_SYNC_SAMPLE_FLAGS = 0x01010000  # sample_depends_on = 1, sample_is_non_sync_sample

FlagsMode = Literal["first", "per_sample", "tfhd"]


def box(typ: str, *payload: bytes, largesize: bool = False) -> bytes:
    body = b"".join(payload)
    if largesize:
        return struct.pack(">I4sQ", 1, typ.encode("latin-1"), len(body) + 16) + body
    return struct.pack(">I4s", len(body) + 8, typ.encode("latin-1")) + body


def full_box(typ: str, version: int, flags: int, *payload: bytes) -> bytes:
    return box(typ, struct.pack(">I", (version << 24) | flags), *payload)


_UNITY_MATRIX = struct.pack(">9I", 0x00010000, 0, 0, 0, 0x00010000, 0, 0, 0, 0x40000000)


@dataclass(frozen=True)
class SynthSpec:
    track_kind: Literal["video", "audio"] = "video"
    timescale: int = 15360
    chunk_count: int = 10
    chunks_per_fragment: int = 2
    samples_per_chunk: int = 15
    sample_duration: int = 512
    payload_bytes_per_sample: int = 64
    seed: int = 0
    track_id: int = 1
    # container variations, so parsers see every defaulting path
    durations_in_trun: bool = False
    flags_mode: FlagsMode = "first"
    with_styp: bool = False
    with_prft: bool = False
    largesize_mdat: bool = False
    tfdt_version: int = 1
    width: int = 640
    height: int = 360

    def __post_init__(self) -> None:
        for name in ("timescale", "chunk_count", "chunks_per_fragment", "samples_per_chunk",
                     "sample_duration", "payload_bytes_per_sample"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.track_kind not in ("video", "audio"):
            raise ValueError("track_kind must be 'video' or 'audio'")
        if self.flags_mode not in ("first", "per_sample", "tfhd"):
            raise ValueError(f"unknown flags_mode {self.flags_mode!r}")

    @classmethod
    def audio(cls, **kw) -> SynthSpec:
        kw.setdefault("timescale", 48000)
        kw.setdefault("sample_duration", 1024)
        kw.setdefault("samples_per_chunk", 10)
        return cls(track_kind="audio", **kw)


@dataclass
class SynthTrack:
    spec: SynthSpec
    header: bytes
    chunks: list[bytes]
    boundaries: list[int]
    chunk_durations: list[int] = field(default_factory=list)
    chunk_decode_times: list[int] = field(default_factory=list)

    @property
    def data(self) -> bytes:
        return self.header + b"".join(self.chunks)

    @property
    def fragment_count(self) -> int:
        return len(self.boundaries)

    def fragments(self) -> list[bytes]:
        """Expected bytes of every fragment file."""
        out = []
        edges = self.boundaries + [len(self.chunks)]
        for a, b in zip(edges, edges[1:]):
            out.append(b"".join(self.chunks[a:b]))
        return out

    def iter_wire_chunks(self) -> Iterable[bytes]:
        yield self.header
        yield from self.chunks


def _ftyp() -> bytes:
    return box("ftyp", b"cmf2", struct.pack(">I", 0), b"cmfc", b"iso6", b"cmf2")


def _sample_entry(spec: SynthSpec) -> bytes:
    if spec.track_kind == "video":
        avcc = box("avcC", bytes([1, 0x42, 0xC0, 0x1E, 0xFF, 0xE0, 0x00]))
        return box(
            "avc1",
            bytes(6), struct.pack(">H", 1),
            bytes(16),
            struct.pack(">HH", spec.width, spec.height),
            struct.pack(">II", 0x00480000, 0x00480000),
            bytes(4), struct.pack(">H", 1),
            bytes(32),
            struct.pack(">Hh", 0x0018, -1),
            avcc,
        )
    return box(
        "mp4a",
        bytes(6), struct.pack(">H", 1),
        bytes(8),
        struct.pack(">HH", 2, 16),
        bytes(4),
        struct.pack(">I", (spec.timescale & 0xFFFF) << 16),
    )


def _header(spec: SynthSpec) -> bytes:
    video = spec.track_kind == "video"
    mvhd = full_box(
        "mvhd", 0, 0,
        struct.pack(">IIII", 0, 0, 1000, 0),
        struct.pack(">IH", 0x00010000, 0x0100), bytes(10),
        _UNITY_MATRIX, bytes(24),
        struct.pack(">I", spec.track_id + 1),
    )
    tkhd = full_box(
        "tkhd", 0, 0x3,
        struct.pack(">IIIII", 0, 0, spec.track_id, 0, 0),
        bytes(8),
        struct.pack(">hhhH", 0, 0, 0 if video else 0x0100, 0),
        _UNITY_MATRIX,
        struct.pack(">II", (spec.width << 16) if video else 0, (spec.height << 16) if video else 0),
    )
    mdhd = full_box("mdhd", 0, 0, struct.pack(">IIIIHH", 0, 0, spec.timescale, 0, 0x55C4, 0))
    handler = b"vide" if video else b"soun"
    name = b"VideoHandler\x00" if video else b"SoundHandler\x00"
    hdlr = full_box("hdlr", 0, 0, struct.pack(">I", 0), handler, bytes(12), name)
    media_header = full_box("vmhd", 0, 1, bytes(8)) if video else full_box("smhd", 0, 0, bytes(4))
    dinf = box("dinf", full_box("dref", 0, 0, struct.pack(">I", 1), full_box("url ", 0, 1)))
    stbl = box(
        "stbl",
        full_box("stsd", 0, 0, struct.pack(">I", 1), _sample_entry(spec)),
        full_box("stts", 0, 0, struct.pack(">I", 0)),
        full_box("stsc", 0, 0, struct.pack(">I", 0)),
        full_box("stsz", 0, 0, struct.pack(">II", 0, 0)),
        full_box("stco", 0, 0, struct.pack(">I", 0)),
    )
    minf = box("minf", media_header, dinf, stbl)
    trak = box("trak", tkhd, box("mdia", mdhd, hdlr, minf))
    trex_flags = NON_SYNC_SAMPLE_FLAGS if video else SYNC_SAMPLE_FLAGS
    trex = full_box("trex", 0, 0, struct.pack(">IIIII", spec.track_id, 1, spec.sample_duration, 0, trex_flags))
    moov = box("moov", mvhd, trak, box("mvex", trex))
    return _ftyp() + moov


def _chunk(spec: SynthSpec, seq: int, decode_time: int, sync: bool, fragment_start: bool,
           rng: random.Random) -> bytes:
    n = spec.samples_per_chunk
    sizes = [spec.payload_bytes_per_sample] * n
    payload = rng.randbytes(sum(sizes))
    first = SYNC_SAMPLE_FLAGS if sync else NON_SYNC_SAMPLE_FLAGS

    tfhd_flags = 0x020000  # default-base-is-moof
    tfhd_fields = struct.pack(">I", spec.track_id)
    if not spec.durations_in_trun:
        tfhd_flags |= 0x08
        tfhd_fields += struct.pack(">I", spec.sample_duration)
    if spec.flags_mode == "tfhd":
        tfhd_flags |= 0x20
        tfhd_fields += struct.pack(">I", first)
    elif spec.flags_mode == "first":
        tfhd_flags |= 0x20
        tfhd_fields += struct.pack(">I", NON_SYNC_SAMPLE_FLAGS if spec.track_kind == "video" else SYNC_SAMPLE_FLAGS)
    tfhd = full_box("tfhd", 0, tfhd_flags, tfhd_fields)
    if spec.tfdt_version == 1:
        tfdt = full_box("tfdt", 1, 0, struct.pack(">Q", decode_time))
    else:
        tfdt = full_box("tfdt", 0, 0, struct.pack(">I", decode_time & 0xFFFFFFFF))

    trun_flags = 0x001 | 0x200
    if spec.durations_in_trun:
        trun_flags |= 0x100
    if spec.flags_mode == "first":
        trun_flags |= 0x004
    if spec.flags_mode == "per_sample":
        trun_flags |= 0x400

    def trun(data_offset: int) -> bytes:
        parts = [struct.pack(">Ii", n, data_offset)]
        if spec.flags_mode == "first":
            parts.append(struct.pack(">I", first))
        for i in range(n):
            if spec.durations_in_trun:
                parts.append(struct.pack(">I", spec.sample_duration))
            parts.append(struct.pack(">I", sizes[i]))
            if spec.flags_mode == "per_sample":
                flags = first if i == 0 else (NON_SYNC_SAMPLE_FLAGS if spec.track_kind == "video" else SYNC_SAMPLE_FLAGS)
                parts.append(struct.pack(">I", flags))
        return full_box("trun", 0, trun_flags, *parts)

    mfhd = full_box("mfhd", 0, 0, struct.pack(">I", seq))
    mdat_header_len = 16 if spec.largesize_mdat else 8
    moof_len = len(box("moof", mfhd, box("traf", tfhd, tfdt, trun(0))))
    moof = box("moof", mfhd, box("traf", tfhd, tfdt, trun(moof_len + mdat_header_len)))
    mdat = box("mdat", payload, largesize=spec.largesize_mdat)

    prefix = b""
    if spec.with_styp and fragment_start:
        prefix += box("styp", b"cmfs", struct.pack(">I", 0), b"cmfs", b"cmfc")
    if spec.with_prft:
        prefix += full_box("prft", 1, 0, struct.pack(">IQQ", spec.track_id, 0, decode_time))
    return prefix + moof + mdat


def synth_track(spec: SynthSpec) -> SynthTrack:
    rng = random.Random(spec.seed)
    header = _header(spec)
    chunks: list[bytes] = []
    boundaries: list[int] = []
    durations: list[int] = []
    times: list[int] = []
    t = 0
    for i in range(spec.chunk_count):
        start = i % spec.chunks_per_fragment == 0
        if spec.track_kind == "audio" or start:
            boundaries.append(i)
        sync = start or spec.track_kind == "audio"
        chunks.append(_chunk(spec, i + 1, t, sync, start, rng))
        d = spec.samples_per_chunk * spec.sample_duration
        durations.append(d)
        times.append(t)
        t += d
    return SynthTrack(spec, header, chunks, boundaries, durations, times)

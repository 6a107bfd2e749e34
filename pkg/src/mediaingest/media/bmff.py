"""ISO-BMFF box scanning and CMAF header/chunk parsing.

Only metadata boxes are decoded; mdat payloads are carried through as
opaque bytes. All multi-byte fields are big-endian.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterator

from .model import Chunk, CmafHeader, HandlerType

# sample_is_non_sync_sample bit of the 32-bit sample flags word
SAMPLE_IS_NON_SYNC = 0x00010000

CHUNK_PREFIX_BOXES = frozenset({"styp", "prft", "emsg"})


class MediaError(Exception):
    pass


class TruncatedError(MediaError):
    pass


class MalformedBoxError(MediaError):
    pass


class UnexpectedBoxError(MediaError):
    def __init__(self, box_type: str, context: str = "") -> None:
        super().__init__(f"unexpected box {box_type!r}{' ' + context if context else ''}")
        self.box_type = box_type


class MissingHeaderError(MediaError):
    pass


class SizeLimitError(MediaError):
    def __init__(self, what: str, limit: int) -> None:
        super().__init__(f"{what} exceeds limit of {limit} bytes")
        self.limit = limit


@dataclass(frozen=True)
class BoxHeader:
    size: int
    type: str
    header_len: int
    raw: bytes = b""

    @property
    def payload_size(self) -> int | None:
        return None if self.size == 0 else self.size - self.header_len


def _read_exact(src: BinaryIO, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        data = src.read(n - len(buf))
        if not data:
            break
        buf += data
    return bytes(buf)


def _decode_type(b: bytes) -> str:
    return b.decode("latin-1")


def parse_box_header(data: bytes, offset: int = 0, end: int | None = None) -> BoxHeader:
    """Decode a box header from an in-memory buffer."""
    end = len(data) if end is None else end
    if end - offset < 8:
        raise TruncatedError(f"box header truncated at offset {offset}")
    size, typ = struct.unpack_from(">I4s", data, offset)
    hlen = 8
    if size == 1:
        if end - offset < 16:
            raise TruncatedError(f"largesize header truncated at offset {offset}")
        (size,) = struct.unpack_from(">Q", data, offset + 8)
        hlen = 16
    if size != 0 and size < hlen:
        raise MalformedBoxError(f"box {_decode_type(typ)!r} size {size} smaller than its header")
    return BoxHeader(size, _decode_type(typ), hlen, bytes(data[offset:offset + hlen]))


def read_box_header(src: BinaryIO) -> BoxHeader | None:
    """Read one box header from a stream; None on clean end of stream."""
    first = _read_exact(src, 8)
    if not first:
        return None
    if len(first) < 8:
        raise TruncatedError(f"box header truncated after {len(first)} bytes")
    size, typ = struct.unpack(">I4s", first)
    raw = first
    hlen = 8
    if size == 1:
        ext = _read_exact(src, 8)
        if len(ext) < 8:
            raise TruncatedError("largesize field truncated")
        (size,) = struct.unpack(">Q", ext)
        raw += ext
        hlen = 16
    if size != 0 and size < hlen:
        raise MalformedBoxError(f"box {_decode_type(typ)!r} size {size} smaller than its header")
    return BoxHeader(size, _decode_type(typ), hlen, raw)


def _read_box(src: BinaryIO, hdr: BoxHeader) -> bytes:
    if hdr.size == 0:
        payload = src.read()
    else:
        payload = _read_exact(src, hdr.size - hdr.header_len)
        if len(payload) < hdr.size - hdr.header_len:
            raise TruncatedError(f"box {hdr.type!r} truncated: {hdr.header_len + len(payload)} of {hdr.size} bytes")
    return hdr.raw + payload


def iter_boxes(data: bytes, start: int = 0, end: int | None = None) -> Iterator[tuple[BoxHeader, int, int]]:
    """Yield (header, payload_start, box_end) for consecutive boxes in a buffer."""
    end = len(data) if end is None else end
    off = start
    while off < end:
        hdr = parse_box_header(data, off, end)
        box_end = end if hdr.size == 0 else off + hdr.size
        if box_end > end:
            raise TruncatedError(f"box {hdr.type!r} at {off} extends past its container")
        yield hdr, off + hdr.header_len, box_end
        off = box_end


def find_child(data: bytes, start: int, end: int, box_type: str) -> tuple[int, int] | None:
    for hdr, p, e in iter_boxes(data, start, end):
        if hdr.type == box_type:
            return p, e
    return None


def _children(data: bytes, start: int, end: int, box_type: str) -> list[tuple[int, int]]:
    return [(p, e) for hdr, p, e in iter_boxes(data, start, end) if hdr.type == box_type]


def _full_box(data: bytes, p: int, e: int) -> tuple[int, int, int]:
    if e - p < 4:
        raise MalformedBoxError("full box header truncated")
    vf = struct.unpack_from(">I", data, p)[0]
    return vf >> 24, vf & 0xFFFFFF, p + 4


def _u32(data: bytes, off: int, end: int) -> int:
    if off + 4 > end:
        raise MalformedBoxError("field past end of box")
    return struct.unpack_from(">I", data, off)[0]


def _u64(data: bytes, off: int, end: int) -> int:
    if off + 8 > end:
        raise MalformedBoxError("field past end of box")
    return struct.unpack_from(">Q", data, off)[0]


# header


def parse_cmaf_header(data: bytes) -> CmafHeader:
    """Parse a CMAF header (ftyp + moov) held in memory."""
    data = bytes(data)
    boxes = list(iter_boxes(data))
    if not boxes or boxes[0][0].type != "ftyp":
        first = boxes[0][0].type if boxes else "nothing"
        raise MissingHeaderError(f"CMAF header must start with ftyp, found {first!r}")
    brands = _parse_ftyp(data, boxes[0][1], boxes[0][2])
    moovs = [b for b in boxes if b[0].type == "moov"]
    if not moovs:
        raise MissingHeaderError("CMAF header has no moov box")
    if len(moovs) > 1:
        raise MalformedBoxError("CMAF header has more than one moov box")
    _, mp, me = moovs[0]
    traks = _children(data, mp, me, "trak")
    if not traks:
        raise MalformedBoxError("moov has no trak")
    if len(traks) > 1:
        raise MalformedBoxError(f"CMAF header carries {len(traks)} tracks, expected exactly one")
    tp, te = traks[0]

    tkhd = find_child(data, tp, te, "tkhd")
    if tkhd is None:
        raise MalformedBoxError("trak has no tkhd")
    version, _flags, off = _full_box(data, *tkhd)
    track_id = _u32(data, off + (16 if version == 1 else 8), tkhd[1])

    mdia = find_child(data, tp, te, "mdia")
    if mdia is None:
        raise MalformedBoxError("trak has no mdia")
    mdhd = find_child(data, mdia[0], mdia[1], "mdhd")
    if mdhd is None:
        raise MalformedBoxError("mdia has no mdhd")
    version, _flags, off = _full_box(data, *mdhd)
    timescale = _u32(data, off + (16 if version == 1 else 8), mdhd[1])
    if timescale <= 0:
        raise MalformedBoxError("mdhd timescale must be positive")
    hdlr = find_child(data, mdia[0], mdia[1], "hdlr")
    if hdlr is None:
        raise MalformedBoxError("mdia has no hdlr")
    _v, _f, off = _full_box(data, *hdlr)
    if off + 8 > hdlr[1]:
        raise MalformedBoxError("hdlr truncated")
    handler = _decode_type(data[off + 4:off + 8])

    has_kind = False
    udta = find_child(data, tp, te, "udta")
    if udta is not None and find_child(data, udta[0], udta[1], "kind") is not None:
        has_kind = True

    dur = flags = None
    mvex = find_child(data, mp, me, "mvex")
    if mvex is not None:
        for p, e in _children(data, mvex[0], mvex[1], "trex"):
            _v, _f, off = _full_box(data, p, e)
            if _u32(data, off, e) == track_id:
                dur = _u32(data, off + 8, e)
                flags = _u32(data, off + 16, e)
                break

    return CmafHeader(
        raw=data,
        track_id=track_id,
        timescale=timescale,
        handler_type=HandlerType.from_hdlr(handler),
        brands=brands,
        default_sample_duration=dur,
        default_sample_flags=flags,
        has_kind_box=has_kind,
    )


def _parse_ftyp(data: bytes, p: int, e: int) -> tuple[str, ...]:
    if e - p < 8:
        raise MalformedBoxError("ftyp truncated")
    brands = [_decode_type(data[p:p + 4])]
    for off in range(p + 8, e - 3, 4):
        b = _decode_type(data[off:off + 4])
        if b not in brands:
            brands.append(b)
    return tuple(brands)


def read_cmaf_header(src: BinaryIO, limit: int | None = None) -> CmafHeader:
    """Read ftyp then moov from a stream and parse them."""
    hdr = read_box_header(src)
    if hdr is None:
        raise MissingHeaderError("empty stream")
    if hdr.type != "ftyp":
        raise MissingHeaderError(f"stream must start with ftyp, found {hdr.type!r}")
    if hdr.size == 0:
        raise MalformedBoxError("ftyp may not extend to end of stream")
    total = hdr.size
    if limit is not None and total > limit:
        raise SizeLimitError("CMAF header", limit)
    ftyp = _read_box(src, hdr)
    hdr = read_box_header(src)
    if hdr is None:
        raise MissingHeaderError("stream ended before moov")
    if hdr.type != "moov":
        raise MissingHeaderError(f"expected moov after ftyp, found {hdr.type!r}")
    if hdr.size == 0:
        raise MalformedBoxError("moov may not extend to end of stream")
    total += hdr.size
    if limit is not None and total > limit:
        raise SizeLimitError("CMAF header", limit)
    moov = _read_box(src, hdr)
    return parse_cmaf_header(ftyp + moov)


# chunks


@dataclass
class _TrafInfo:
    base_decode_time: int
    sample_count: int
    duration: int | None
    first_flags: int | None


def _parse_moof(data: bytes, p: int, e: int, header: CmafHeader | None) -> tuple[int, _TrafInfo]:
    seq = 0
    mfhd = find_child(data, p, e, "mfhd")
    if mfhd is not None:
        _v, _f, off = _full_box(data, *mfhd)
        seq = _u32(data, off, mfhd[1])
    trafs = _children(data, p, e, "traf")
    if len(trafs) != 1:
        raise MalformedBoxError(f"moof must carry exactly one traf, found {len(trafs)}")
    return seq, _parse_traf(data, *trafs[0], header)


def _parse_traf(data: bytes, p: int, e: int, header: CmafHeader | None) -> _TrafInfo:
    tfhd = find_child(data, p, e, "tfhd")
    if tfhd is None:
        raise MalformedBoxError("traf has no tfhd")
    _v, flags, off = _full_box(data, *tfhd)
    end = tfhd[1]
    off += 4  # track_ID
    if flags & 0x01:
        off += 8
    if flags & 0x02:
        off += 4
    default_duration = default_flags = None
    if flags & 0x08:
        default_duration = _u32(data, off, end)
        off += 4
    if flags & 0x10:
        off += 4
    if flags & 0x20:
        default_flags = _u32(data, off, end)
        off += 4
    if default_duration is None and header is not None:
        default_duration = header.default_sample_duration

    base_time = 0
    tfdt = find_child(data, p, e, "tfdt")
    if tfdt is not None:
        version, _f, off = _full_box(data, *tfdt)
        base_time = _u64(data, off, tfdt[1]) if version == 1 else _u32(data, off, tfdt[1])

    sample_count = 0
    duration: int | None = 0
    first_flags: int | None = None
    truns = _children(data, p, e, "trun")
    if not truns:
        raise MalformedBoxError("traf has no trun")
    for i, (tp, te) in enumerate(truns):
        _v, tflags, off = _full_box(data, tp, te)
        count = _u32(data, off, te)
        off += 4
        if tflags & 0x001:
            off += 4
        run_first_flags = None
        if tflags & 0x004:
            run_first_flags = _u32(data, off, te)
            off += 4
        per_sample = [tflags & 0x100, tflags & 0x200, tflags & 0x400, tflags & 0x800]
        stride = 4 * sum(1 for x in per_sample if x)
        if off + stride * count > te:
            raise MalformedBoxError("trun sample table past end of box")
        run_duration = 0
        for s in range(count):
            so = off + s * stride
            if tflags & 0x100:
                run_duration += struct.unpack_from(">I", data, so)[0]
                so += 4
            if tflags & 0x200:
                so += 4
            if tflags & 0x400 and s == 0 and run_first_flags is None:
                run_first_flags = struct.unpack_from(">I", data, so)[0]
        if not tflags & 0x100:
            run_duration = None if default_duration is None else default_duration * count
        if i == 0:
            first_flags = run_first_flags
        if duration is not None:
            duration = None if run_duration is None else duration + run_duration
        sample_count += count

    if first_flags is None:
        first_flags = default_flags
    if first_flags is None and header is not None:
        first_flags = header.default_sample_flags
    return _TrafInfo(base_time, sample_count, duration, first_flags)


def scan_chunk(src: BinaryIO, header: CmafHeader | None = None, limit: int | None = None) -> Chunk | None:
    """Consume one CMAF chunk (optional styp/prft/emsg, moof, mdat) from a stream.

    Returns None on a clean end of stream at a chunk boundary. ``limit``
    bounds the chunk's total size and is checked from box headers before any
    payload is read.
    """
    parts: list[bytes] = []
    size = 0
    moof: tuple[int, int] | None = None
    info: _TrafInfo | None = None
    seq = 0
    while True:
        hdr = read_box_header(src)
        if hdr is None:
            if not parts:
                return None
            raise TruncatedError("stream ended inside a chunk (moof without mdat)")
        if hdr.type == "mdat" and moof is None:
            raise UnexpectedBoxError("mdat", "before moof")
        if hdr.type not in CHUNK_PREFIX_BOXES and hdr.type not in ("moof", "mdat"):
            raise UnexpectedBoxError(hdr.type, "in chunk stream")
        if hdr.type in CHUNK_PREFIX_BOXES and moof is not None:
            raise UnexpectedBoxError(hdr.type, "between moof and mdat")
        if hdr.type == "moof" and moof is not None:
            raise UnexpectedBoxError("moof", "moof without mdat")
        if limit is not None and (hdr.size == 0 or size + hdr.size > limit):
            raise SizeLimitError("chunk", limit)
        box = _read_box(src, hdr)
        if hdr.type == "moof":
            moof = (size, len(box))
            seq, info = _parse_moof(box, hdr.header_len, len(box), header)
        parts.append(box)
        offset = size
        size += len(box)
        if hdr.type == "mdat":
            assert moof is not None and info is not None
            return Chunk(
                raw=b"".join(parts),
                moof_offset=moof[0],
                moof_len=moof[1],
                mdat_offset=offset,
                mdat_len=len(box),
                base_decode_time=info.base_decode_time,
                first_sample_is_sync=None if info.first_flags is None
                else not (info.first_flags & SAMPLE_IS_NON_SYNC),
                sample_count=info.sample_count,
                duration=info.duration,
                sequence_number=seq,
            )


def parse_chunk(data: bytes, header: CmafHeader | None = None) -> Chunk:
    buf = io.BytesIO(data)
    c = scan_chunk(buf, header)
    if c is None:
        raise TruncatedError("no chunk in buffer")
    if buf.read(1):
        raise MalformedBoxError("trailing data after chunk")
    return c


def is_fragment_boundary(c: Chunk, header: CmafHeader | None = None) -> bool:
    """True when the chunk starts a new fragment.

    Every audio sample is independently decodable, so each audio chunk starts
    a fragment.
    """
    if header is not None and header.handler_type is HandlerType.AUDIO:
        return True
    if c.first_sample_is_sync is None:
        raise MalformedBoxError("cannot determine sync status of the first sample")
    return c.first_sample_is_sync


def chunk_duration_ticks(c: Chunk) -> int:
    if c.duration is None:
        raise MalformedBoxError("chunk carries no sample durations and no defaults apply")
    return c.duration

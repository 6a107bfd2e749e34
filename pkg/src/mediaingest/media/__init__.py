from .bmff import (
    BoxHeader,
    MalformedBoxError,
    MediaError,
    MissingHeaderError,
    SizeLimitError,
    TruncatedError,
    UnexpectedBoxError,
    chunk_duration_ticks,
    is_fragment_boundary,
    iter_boxes,
    parse_box_header,
    parse_chunk,
    parse_cmaf_header,
    read_box_header,
    read_cmaf_header,
    scan_chunk,
)
from .model import (
    Chunk,
    CmafHeader,
    Fragment,
    HandlerType,
    Presentation,
    PresentationState,
    SwitchingSet,
    Track,
)

__all__ = [
    "BoxHeader",
    "Chunk",
    "CmafHeader",
    "Fragment",
    "HandlerType",
    "MalformedBoxError",
    "MediaError",
    "MissingHeaderError",
    "Presentation",
    "PresentationState",
    "SizeLimitError",
    "SwitchingSet",
    "Track",
    "TruncatedError",
    "UnexpectedBoxError",
    "chunk_duration_ticks",
    "is_fragment_boundary",
    "iter_boxes",
    "parse_box_header",
    "parse_chunk",
    "parse_cmaf_header",
    "read_box_header",
    "read_cmaf_header",
    "scan_chunk",
]

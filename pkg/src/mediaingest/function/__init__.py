from ..config import FunctionCfg
from ..runtime import ExecContext
from .base import Function
from .cleanup import CleanupEntry, CleanupFunction
from .cloudevent import CloudEventFunction, to_cloud_event
from .copy import CopyFunction
from .manifest import ManifestFunction, render_media_playlist, render_multivariant_playlist

FUNCTION_TYPES: dict[str, type[Function]] = {
    "copy": CopyFunction,
    "manifest": ManifestFunction,
    "cloudEvent": CloudEventFunction,
    "cleanup": CleanupFunction,
}


def new_function(cfg: FunctionCfg, ectx: ExecContext) -> Function:
    try:
        cls = FUNCTION_TYPES[cfg.type]
    except KeyError:
        raise ValueError(f"unknown function type {cfg.type!r}") from None
    return cls(cfg, ectx)


__all__ = [
    "CleanupEntry",
    "CleanupFunction",
    "CloudEventFunction",
    "CopyFunction",
    "FUNCTION_TYPES",
    "Function",
    "ManifestFunction",
    "new_function",
    "render_media_playlist",
    "render_multivariant_playlist",
    "to_cloud_event",
]

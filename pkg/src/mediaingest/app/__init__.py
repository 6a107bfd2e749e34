from ..config import AppCfg
from ..runtime import ExecContext
from .base import App
from .cmaf_ingest import CmafIngestApp, IngestAddress, IngestPathError, UnsupportedSignalingError, parse_ingest_path
from .dash_hls_ingest import DashHlsIngestApp
from .generic_serve import GenericServeApp, RangeNotSatisfiable, parse_range

APP_TYPES: dict[str, type[App]] = {
    "cmafIngest": CmafIngestApp,
    "dashAndHlsIngest": DashHlsIngestApp,
    "genericServe": GenericServeApp,
}


def new_app(cfg: AppCfg, ectx: ExecContext) -> App:
    try:
        cls = APP_TYPES[cfg.type]
    except KeyError:
        raise ValueError(f"unknown app type {cfg.type!r}") from None
    return cls(cfg, ectx)


__all__ = [
    "APP_TYPES",
    "App",
    "CmafIngestApp",
    "DashHlsIngestApp",
    "GenericServeApp",
    "IngestAddress",
    "IngestPathError",
    "RangeNotSatisfiable",
    "UnsupportedSignalingError",
    "new_app",
    "parse_ingest_path",
    "parse_range",
]

from .http import DEFAULT_DRAIN_TIMEOUT, DEFAULT_IDLE_TIMEOUT, HttpApp, HttpServer, host_route_check, join_mount
from .message import BadRequest, BodyReader, Request, Response, stream_reader
from .router import (
    HOSTS_PREFIX,
    INTERNAL_PREFIX,
    RegistrationError,
    Route,
    RouteTable,
    candidate_patterns,
    internal_host_path,
    normalize_host,
)

__all__ = [
    "BadRequest",
    "BodyReader",
    "DEFAULT_DRAIN_TIMEOUT",
    "DEFAULT_IDLE_TIMEOUT",
    "HOSTS_PREFIX",
    "HttpApp",
    "HttpServer",
    "INTERNAL_PREFIX",
    "RegistrationError",
    "Request",
    "Response",
    "Route",
    "RouteTable",
    "candidate_patterns",
    "host_route_check",
    "internal_host_path",
    "join_mount",
    "normalize_host",
    "stream_reader",
]

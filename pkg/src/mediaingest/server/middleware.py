"""Per-application handlers in the host chain: basic auth and CORS."""

from __future__ import annotations

import base64
import binascii
import hmac

from ..config import BasicAuthCfg, CorsCfg, parse_duration
from .message import Request, Response


def basic_auth_check(req: Request, cfg: BasicAuthCfg) -> Response | None:
    """None when the request carries the configured credentials, else a 401."""
    value = req.headers.get("Authorization", "")
    scheme, _, token = value.partition(" ")
    if scheme.lower() == "basic" and token:
        try:
            user, sep, password = base64.b64decode(token.strip(), validate=True).decode("utf-8").partition(":")
        except (binascii.Error, UnicodeDecodeError):
            sep = ""
        if sep and hmac.compare_digest(user.encode(), cfg.username.encode()) \
                and hmac.compare_digest(password.encode(), cfg.password.encode()):
            return None
    resp = Response.text(401, "unauthorized")
    resp.set_header("WWW-Authenticate", f'Basic realm="{cfg.realm}", charset="UTF-8"')
    return resp


def _origin_allowed(origin: str, cfg: CorsCfg) -> bool:
    return "*" in cfg.allowOrigins or origin in cfg.allowOrigins


def _allow_origin_value(origin: str, cfg: CorsCfg) -> str:
    return "*" if "*" in cfg.allowOrigins else origin


def is_preflight(req: Request) -> bool:
    return (req.method == "OPTIONS" and "Origin" in req.headers
            and "Access-Control-Request-Method" in req.headers)


def cors_preflight(req: Request, cfg: CorsCfg) -> Response:
    resp = Response(204)
    origin = req.headers.get("Origin", "")
    wanted = req.headers.get("Access-Control-Request-Method", "").upper()
    if _origin_allowed(origin, cfg) and wanted in (m.upper() for m in cfg.allowMethods):
        resp.set_header("Access-Control-Allow-Origin", _allow_origin_value(origin, cfg))
        resp.set_header("Access-Control-Allow-Methods", ", ".join(cfg.allowMethods))
        requested = req.headers.get("Access-Control-Request-Headers")
        if cfg.allowHeaders:
            resp.set_header("Access-Control-Allow-Headers", ", ".join(cfg.allowHeaders))
        elif requested:
            resp.set_header("Access-Control-Allow-Headers", requested)
        if cfg.maxAge:
            resp.set_header("Access-Control-Max-Age", str(int(parse_duration(cfg.maxAge) // 1000)))
        if "*" not in cfg.allowOrigins:
            resp.set_header("Vary", "Origin")
    return resp


def cors_apply(req: Request, resp: Response, cfg: CorsCfg) -> None:
    origin = req.headers.get("Origin")
    if origin and _origin_allowed(origin, cfg):
        resp.set_header("Access-Control-Allow-Origin", _allow_origin_value(origin, cfg))
        if "*" not in cfg.allowOrigins:
            resp.set_header("Vary", "Origin")

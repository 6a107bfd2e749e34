"""Host-pattern routing through internal redirect paths.

Every distinct host pattern gets an internal path prefix
``/sys/internal/hosts/<sha256 hex of the pattern>``. The root router maps the
request host to an ordered list of candidate patterns, internally redirects
the request to each candidate's prefix in turn and lets the first candidate
that defines a handler for the method and path serve it.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable

from ..glob import Glob, has_meta, host_glob

if TYPE_CHECKING:
    from .http import Request, Response

INTERNAL_PREFIX = "/sys/internal/"
HOSTS_PREFIX = "/sys/internal/hosts/"

Handler = Callable[["Request"], "Response"]


class RegistrationError(Exception):
    pass


def internal_host_path(pattern: str) -> str:
    return HOSTS_PREFIX + hashlib.sha256(pattern.encode("utf-8")).hexdigest()


def normalize_host(host: str | None) -> str:
    """Lowercase host without port or trailing dot."""
    if not host:
        return ""
    host = host.strip()
    if host.startswith("["):
        end = host.find("]")
        host = host[1:end] if end > 0 else host
    elif host.count(":") == 1:
        host = host.split(":", 1)[0]
    return host.rstrip(".").lower()


def is_exact_pattern(pattern: str) -> bool:
    return not has_meta(pattern)


def candidate_patterns(patterns: list[str], host: str) -> list[str]:
    """Patterns to try for ``host``: exact matches first, then matching globs
    by descending length, equal lengths in lexicographic order."""
    host = normalize_host(host)
    exact = [p for p in patterns if is_exact_pattern(p) and p.lower() == host]
    globs = [p for p in patterns if not is_exact_pattern(p) and host_glob(p).match(host)]
    globs.sort(key=lambda p: (-len(p), p))
    return exact + globs


@dataclass
class Route:
    """A handler for ``method`` (or ``"*"`` for any) on a path.

    ``path`` is either an exact path or a prefix ending in ``/*``, which
    matches the prefix itself and everything below it.
    """

    method: str
    path: str
    handler: Handler
    app: object | None = None
    mount: str = "/"

    def matches_path(self, path: str) -> bool:
        if self.path.endswith("/*"):
            base = self.path[:-2]
            return path == base or path.startswith(base + "/") or (base == "" and path.startswith("/"))
        return path == self.path

    @property
    def specificity(self) -> int:
        return len(self.path) - (2 if self.path.endswith("/*") else 0)


@dataclass
class HostEntry:
    pattern: str
    internal_path: str
    glob: Glob
    routes: list[Route] = field(default_factory=list)

    def add(self, route: Route) -> None:
        for r in self.routes:
            if r.method == route.method and r.path == route.path:
                raise RegistrationError(
                    f"duplicate route {route.method} {route.path} for host pattern {self.pattern!r}")
        self.routes.append(route)

    def lookup(self, method: str, path: str) -> Route | None:
        """Most specific route for path; exact method beats the wildcard."""
        best: Route | None = None
        for r in self.routes:
            if r.method not in (method, "*") or not r.matches_path(path):
                continue
            if best is None or (r.specificity, r.method != "*") > (best.specificity, best.method != "*"):
                best = r
        return best

    def lookup_any_method(self, path: str) -> Route | None:
        best = None
        for r in self.routes:
            if r.matches_path(path) and (best is None or r.specificity > best.specificity):
                best = r
        return best


class RouteTable:
    """Internal host path -> entry. Immutable once the server listens."""

    def __init__(self) -> None:
        self.entries: dict[str, HostEntry] = {}
        self._frozen = False

    def freeze(self) -> None:
        self._frozen = True

    def entry(self, pattern: str) -> HostEntry:
        path = internal_host_path(pattern)
        e = self.entries.get(path)
        if e is None:
            if self._frozen:
                raise RegistrationError("route table is frozen")
            e = HostEntry(pattern, path, host_glob(pattern))
            self.entries[path] = e
        return e

    def add(self, pattern: str, route: Route) -> None:
        if self._frozen:
            raise RegistrationError("route table is frozen")
        self.entry(pattern).add(route)

    @property
    def patterns(self) -> list[str]:
        return [e.pattern for e in self.entries.values()]

    def candidates(self, host: str) -> list[HostEntry]:
        by_pattern = {e.pattern: e for e in self.entries.values()}
        return [by_pattern[p] for p in candidate_patterns(list(by_pattern), host)]

    def resolve_internal(self, internal_path: str) -> tuple[HostEntry, str] | None:
        """Split an internally redirected path into its host entry and the request path."""
        if not internal_path.startswith(HOSTS_PREFIX):
            return None
        rest = internal_path[len(HOSTS_PREFIX):]
        digest, _, tail = rest.partition("/")
        e = self.entries.get(HOSTS_PREFIX + digest)
        if e is None:
            return None
        return e, "/" + tail

"""Glob patterns with a configurable word separator.

``*`` matches within one word, ``**`` across words, ``?`` one non-separator
character; ``[abc]``, ``[a-z]``, ``[!x]`` character lists and ``{a,b}``
alternatives are supported. Hosts use ``.`` as separator, paths ``/``.
"""

from __future__ import annotations

import functools
import re

META_CHARS = frozenset("*?[]{}\\")


class GlobError(ValueError):
    pass


def has_meta(pattern: str) -> bool:
    return any(c in META_CHARS for c in pattern)


def _translate(p: str, i: int, sep: str, stop: str) -> tuple[str, int]:
    """Translate ``p[i:]`` up to an unnested character in ``stop``."""
    nsep = re.escape(sep)
    out: list[str] = []
    while i < len(p):
        c = p[i]
        if c in stop:
            return "".join(out), i
        if c == "*":
            if p.startswith("**", i):
                out.append(".*")
                i += 2
            else:
                out.append(f"[^{nsep}]*")
                i += 1
        elif c == "?":
            out.append(f"[^{nsep}]")
            i += 1
        elif c == "[":
            j = i + 1
            negate = j < len(p) and p[j] in "!^"
            if negate:
                j += 1
            start = j
            # a leading ']' is literal
            if j < len(p) and p[j] == "]":
                j += 1
            while j < len(p) and p[j] != "]":
                j += 1
            if j >= len(p):
                raise GlobError(f"unterminated character list in {p!r}")
            body = p[start:j]
            if not body:
                raise GlobError(f"empty character list in {p!r}")
            parts = []
            k = 0
            while k < len(body):
                if k + 2 < len(body) and body[k + 1] == "-":
                    lo, hi = body[k], body[k + 2]
                    if lo > hi:
                        raise GlobError(f"bad range {lo}-{hi} in {p!r}")
                    parts.append(f"{re.escape(lo)}-{re.escape(hi)}")
                    k += 3
                else:
                    parts.append(re.escape(body[k]))
                    k += 1
            cls = "".join(parts)
            out.append(f"[^{nsep}{cls}]" if negate else f"[{cls}]")
            i = j + 1
        elif c == "{":
            alts = []
            i += 1
            while True:
                sub, i = _translate(p, i, sep, ",}")
                alts.append(sub)
                if i >= len(p):
                    raise GlobError(f"unterminated alternatives in {p!r}")
                if p[i] == "}":
                    i += 1
                    break
                i += 1  # ','
            out.append("(?:" + "|".join(alts) + ")")
        elif c == "\\":
            if i + 1 >= len(p):
                raise GlobError(f"trailing escape in {p!r}")
            out.append(re.escape(p[i + 1]))
            i += 2
        elif c in "]}":
            raise GlobError(f"unbalanced {c!r} in {p!r}")
        elif c == ",":
            out.append(",")
            i += 1
        else:
            out.append(re.escape(c))
            i += 1
    return "".join(out), i


@functools.lru_cache(maxsize=1024)
def compile_glob(pattern: str, sep: str = ".", ignore_case: bool = False) -> re.Pattern[str]:
    if not pattern:
        raise GlobError("empty pattern")
    body, _ = _translate(pattern, 0, sep, "")
    return re.compile(f"(?s:{body})\\Z", re.IGNORECASE if ignore_case else 0)


class Glob:
    def __init__(self, pattern: str, sep: str = ".", ignore_case: bool = False) -> None:
        self.pattern = pattern
        self.regex = compile_glob(pattern, sep, ignore_case)

    def match(self, s: str) -> bool:
        return self.regex.match(s) is not None

    def __repr__(self) -> str:
        return f"Glob({self.pattern!r})"


def host_glob(pattern: str) -> Glob:
    return Glob(pattern, ".", ignore_case=True)


def path_glob(pattern: str) -> Glob:
    return Glob(pattern, "/")

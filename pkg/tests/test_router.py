import hashlib
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mediaingest.glob import GlobError, host_glob, path_glob
from mediaingest.server import (
    HOSTS_PREFIX,
    RegistrationError,
    Route,
    RouteTable,
    candidate_patterns,
    internal_host_path,
    normalize_host,
)


@pytest.mark.parametrize("pattern,host,expected", [
    ("*.example.com", "primary.example.com", True),
    ("*.example.com", "primary.example.org", False),
    ("**", "anything.at.all", True),
    ("**", "localhost", True),
    ("*.example.com", "a.b.example.com", False),
    ("**.example.com", "a.b.example.com", True),
    ("?.example.com", "x.example.com", True),
    ("?.example.com", "xy.example.com", False),
    ("[a-c]dn.example.com", "bdn.example.com", True),
    ("[!a-c]dn.example.com", "bdn.example.com", False),
    ("{cdn,edge}.example.com", "edge.example.com", True),
    ("{cdn,edge}.example.com", "origin.example.com", False),
    ("*.EXAMPLE.com", "Primary.Example.COM", True),
])
def test_host_glob(pattern, host, expected):
    assert host_glob(pattern).match(host) is expected


def test_path_glob_words_are_segments():
    assert path_glob("**/*.cmfv").match("ex.str/video/1.cmfv")
    assert not path_glob("*/*.cmfv").match("ex.str/video/1.cmfv")
    assert path_glob("ex.str/*/[0-9]*").match("ex.str/video/0000000001")


@pytest.mark.parametrize("bad", ["", "[abc", "{a,b", "a]", "x\\", "[z-a]"])
def test_glob_syntax_errors(bad):
    with pytest.raises(GlobError):
        host_glob(bad)


def test_internal_path_is_sha256_hex():
    p = internal_host_path("*.example.com")
    digest = hashlib.sha256(b"*.example.com").hexdigest()
    assert p == HOSTS_PREFIX + digest
    assert re.fullmatch(r"[0-9a-f]{64}", p[len(HOSTS_PREFIX):])


def test_normalize_host():
    assert normalize_host("Primary.Example.com:8080") == "primary.example.com"
    assert normalize_host("example.com.") == "example.com"
    assert normalize_host("[::1]:80") == "::1"
    assert normalize_host(None) == ""


def test_exact_before_wildcard():
    pats = ["**", "*.example.com", "primary.example.com"]
    assert candidate_patterns(pats, "primary.example.com") == ["primary.example.com", "*.example.com", "**"]
    assert candidate_patterns(pats, "other.example.com") == ["*.example.com", "**"]
    assert candidate_patterns(pats, "example.org") == ["**"]


def test_equal_length_tie_break_is_lexicographic():
    assert candidate_patterns(["a*.example.com", "*b.example.com"], "ab.example.com") == [
        "*b.example.com", "a*.example.com"]


def test_route_lookup_specificity():
    table = RouteTable()
    h = lambda r: None  # noqa: E731
    e = table.entry("**")
    e.add(Route("*", "/cmaf/*", h))
    e.add(Route("PUT", "/cmaf/*", h))
    e.add(Route("GET", "/cmaf/special", h))
    assert e.lookup("PUT", "/cmaf/a/b").method == "PUT"
    assert e.lookup("POST", "/cmaf/a").method == "*"
    assert e.lookup("GET", "/cmaf/special").path == "/cmaf/special"
    assert e.lookup("GET", "/other") is None
    with pytest.raises(RegistrationError):
        e.add(Route("PUT", "/cmaf/*", h))
    table.freeze()
    with pytest.raises(RegistrationError):
        table.add("new.example.com", Route("GET", "/x", h))


def test_resolve_internal():
    table = RouteTable()
    e = table.entry("*.example.com")
    assert table.resolve_internal(e.internal_path + "/cmaf/x") == (e, "/cmaf/x")
    assert table.resolve_internal(HOSTS_PREFIX + "0" * 64 + "/x") is None


# independent word-level matcher for the property test: "*" is one word,
# "**" one or more words, anything else a literal word
def _oracle_match(pattern_words, host_words):
    if not pattern_words:
        return not host_words
    head, rest = pattern_words[0], pattern_words[1:]
    if head == "**":
        return any(_oracle_match(rest, host_words[k:]) for k in range(1, len(host_words) + 1))
    if not host_words:
        return False
    if head == "*" or head == host_words[0]:
        return _oracle_match(rest, host_words[1:])
    return False


words = st.sampled_from(["a", "b", "cdn", "example", "com"])
host_st = st.lists(words, min_size=1, max_size=4).map(".".join)
pattern_st = st.lists(st.one_of(words, st.just("*"), st.just("**")), min_size=1, max_size=4).map(".".join)


@settings(max_examples=300)
@given(st.lists(st.one_of(pattern_st, host_st), min_size=1, max_size=10, unique=True), host_st)
def test_candidate_order_property(patterns, host):
    got = candidate_patterns(patterns, host)
    exact = [p for p in patterns if "*" not in p and p == host]
    globs = [p for p in patterns if "*" in p and _oracle_match(p.split("."), host.split("."))]
    assert got == exact + sorted(globs, key=lambda p: (-len(p), p))
    assert sorted(len(p) for p in got[len(exact):]) == sorted((len(p) for p in globs))
    lengths = [len(p) for p in got[len(exact):]]
    assert lengths == sorted(lengths, reverse=True)

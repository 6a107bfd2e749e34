import os
import threading
import time

import pytest
import requests
from hypothesis import given, settings
from hypothesis import strategies as st

from mediaingest.app import RangeNotSatisfiable, parse_range

from conftest import running_system, server_url
from configs import system as system_doc

DATA = bytes(range(250)) * 4  # 1000 bytes


def doc(root, serve_options=None, volume_refs=("memVol", "fsVol")):
    return system_doc(
        [{"name": "dash", "type": "dashAndHlsIngest", "mountPath": "/dash", "volumeRefs": ["memVol"],
          "appOptions": {"useInPlaceWriters": True}},
         {"name": "serve", "type": "genericServe", "mountPath": "/", "volumeRefs": list(volume_refs),
          "appOptions": {"refAppName": "dash", **(serve_options or {})}}],
        [{"name": "memVol", "type": "mem"}, {"name": "fsVol", "type": "fs", "options": {"rootPath": str(root)}}])


@pytest.fixture
def env(tmp_path):
    with running_system(doc(tmp_path / "fs")) as system:
        system.volumes.lookup("memVol").write_all("p/file.bin", DATA)
        yield system, server_url(system)


def test_complete_file_headers(env):
    _, url = env
    r = requests.get(url + "/p/file.bin", timeout=5)
    assert r.status_code == 200 and r.content == DATA
    assert r.headers["Content-Length"] == "1000"
    assert r.headers["ETag"].startswith('"')
    assert r.headers["Accept-Ranges"] == "bytes"
    assert r.headers["Last-Modified"].endswith("GMT")
    assert r.headers["Content-Type"] == "application/octet-stream"


def test_range_0_99(env):
    _, url = env
    r = requests.get(url + "/p/file.bin", headers={"Range": "bytes=0-99"}, timeout=5)
    assert r.status_code == 206
    assert r.content == DATA[:100]
    assert r.headers["Content-Range"] == "bytes 0-99/1000"
    assert r.headers["Content-Length"] == "100"


def test_unsatisfiable_range_416(env):
    _, url = env
    r = requests.get(url + "/p/file.bin", headers={"Range": "bytes=1000-"}, timeout=5)
    assert r.status_code == 416
    assert r.headers["Content-Range"] == "bytes */1000"


def test_multi_range_answers_first(env):
    _, url = env
    r = requests.get(url + "/p/file.bin", headers={"Range": "bytes=10-19,50-59"}, timeout=5)
    assert r.status_code == 206 and r.content == DATA[10:20]


def test_range_matches_slice(env):
    _, url = env
    session = requests.Session()

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 1200), st.integers(0, 1200))
    def check(a, b):
        r = session.get(url + "/p/file.bin", headers={"Range": f"bytes={a}-{b}"}, timeout=5)
        if b < a:
            assert r.status_code == 200 and r.content == DATA  # syntactically invalid, ignored
        elif a >= len(DATA):
            assert r.status_code == 416
        else:
            assert r.status_code == 206
            assert r.content == DATA[a:b + 1]
            assert int(r.headers["Content-Length"]) == min(b, len(DATA) - 1) - a + 1

    check()
    session.close()


@pytest.mark.parametrize("header,expected", [
    ("bytes=0-99", (0, 99)), ("bytes=-100", (900, 999)), ("bytes=900-", (900, 999)),
    ("bytes=990-5000", (990, 999)), ("items=0-1", None), ("bytes=5-1", None), ("bytes=abc", None),
])
def test_parse_range(header, expected):
    assert parse_range(header, 1000) == expected


def test_parse_range_unsatisfiable():
    with pytest.raises(RangeNotSatisfiable):
        parse_range("bytes=1000-1001", 1000)
    with pytest.raises(RangeNotSatisfiable):
        parse_range("bytes=-0", 1000)


def test_head_matches_get(env):
    _, url = env
    g = requests.get(url + "/p/file.bin", timeout=5)
    h = requests.head(url + "/p/file.bin", timeout=5)
    assert h.content == b""
    drop = {"X-Request-Id", "Date"}
    assert {k: v for k, v in h.headers.items() if k not in drop} == \
        {k: v for k, v in g.headers.items() if k not in drop}


def test_etag_stable_then_changes(env):
    system, url = env
    e1 = requests.get(url + "/p/file.bin", timeout=5).headers["ETag"]
    assert requests.get(url + "/p/file.bin", timeout=5).headers["ETag"] == e1
    assert requests.get(url + "/p/file.bin", headers={"If-None-Match": e1}, timeout=5).status_code == 304
    time.sleep(0.01)
    system.volumes.lookup("memVol").write_all("p/file.bin", DATA)
    assert requests.get(url + "/p/file.bin", timeout=5).headers["ETag"] != e1


@pytest.mark.parametrize("name,ctype", [
    ("a.m3u8", "application/vnd.apple.mpegurl"), ("a.mpd", "application/dash+xml"),
    ("a.cmfv", "video/mp4"), ("a.cmfa", "audio/mp4"), ("a.xyz", "application/octet-stream"),
])
def test_content_types(env, name, ctype):
    system, url = env
    system.volumes.lookup("memVol").write_all(name, b"x")
    assert requests.get(url + "/" + name, timeout=5).headers["Content-Type"] == ctype


def test_default_content_type_option(tmp_path):
    with running_system(doc(tmp_path / "fs", {"defaultContentType": "text/plain"})) as system:
        system.volumes.lookup("memVol").write_all("x.unknown", b"x")
        assert requests.get(server_url(system) + "/x.unknown", timeout=5).headers["Content-Type"] == "text/plain"


def test_volume_order(env):
    system, url = env
    mem, fs = system.volumes.lookup("memVol"), system.volumes.lookup("fsVol")
    fs.write_all("only-fs", b"from fs")
    mem.write_all("both", b"from mem")
    fs.write_all("both", b"from fs")
    assert requests.get(url + "/only-fs", timeout=5).content == b"from fs"
    assert requests.get(url + "/both", timeout=5).content == b"from mem"
    assert requests.get(url + "/nowhere", timeout=5).status_code == 404


def test_other_methods_405(env):
    _, url = env
    r = requests.delete(url + "/p/file.bin", timeout=5)
    assert r.status_code == 405
    assert set(r.headers["Allow"].split(", ")) == {"GET", "HEAD"}


def test_live_file_streams_chunked(env):
    _, url = env
    gate = threading.Event()

    def body():
        yield b"A" * 1000
        gate.wait(10)
        yield b"B" * 1000

    up = threading.Thread(target=lambda: requests.put(url + "/dash/live/seg.cmfv", data=body(), timeout=10))
    up.start()
    time.sleep(0.2)
    with requests.get(url + "/live/seg.cmfv", stream=True, timeout=10) as r:
        assert r.status_code == 200
        assert r.headers.get("Transfer-Encoding") == "chunked"
        assert "Content-Length" not in r.headers and "ETag" not in r.headers
        it = r.iter_content(None)
        first = next(it)
        assert b"A" * 1000 == first[:1000]
        gate.set()
        rest = b"".join(it)
    up.join(10)
    assert first + rest == b"A" * 1000 + b"B" * 1000


@pytest.mark.parametrize("mode,header", [("xSendfile", "X-Sendfile"), ("xAccelRedirect", "X-Accel-Redirect")])
def test_sendfile(tmp_path, mode, header):
    root = tmp_path / "fs"
    with running_system(doc(root, {"sendfileMode": mode}, ("fsVol", "memVol"))) as system:
        url = server_url(system)
        system.volumes.lookup("fsVol").write_all("p/seg.cmfv", b"disk bytes")
        system.volumes.lookup("memVol").write_all("p/mem.cmfv", b"mem bytes")
        r = requests.get(url + "/p/seg.cmfv", timeout=5)
        assert r.status_code == 200 and r.content == b""
        assert os.path.samefile(r.headers[header], root / "p" / "seg.cmfv")
        r = requests.get(url + "/p/mem.cmfv", timeout=5)
        assert r.content == b"mem bytes" and header not in r.headers

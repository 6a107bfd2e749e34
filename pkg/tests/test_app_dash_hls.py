import threading

import pytest
import requests

from mediaingest.event import FileEvent, FileEventType

from conftest import EventRecorder, running_system, server_url, wait_until
from configs import system as system_doc


def doc(**app_options):
    return system_doc(
        [{"name": "dash", "type": "dashAndHlsIngest", "mountPath": "/dash", "volumeRefs": ["memVol"],
          "appOptions": app_options},
         {"name": "serve", "type": "genericServe", "mountPath": "/", "volumeRefs": ["memVol"],
          "appOptions": {"refAppName": "dash"}}],
        [{"name": "memVol", "type": "mem"}])


@pytest.fixture
def env():
    with running_system(doc(maxFileBytes=1000)) as system:
        rec = EventRecorder(system.streams["dash"])
        yield system, server_url(system), rec
        rec.close()


def committed(rec, path):
    return [e for e in rec.of(FileEvent, FileEventType.COMMITTED) if e.file.path == path]


def test_two_files_same_presentation(env):
    system, url, rec = env
    assert requests.put(url + "/dash/example.str/index.m3u8", data=b"#EXTM3U\n", timeout=5).status_code == 201
    assert requests.post(url + "/dash/example.str/video/720p-07.cmfv", data=b"\x00" * 500,
                         timeout=5).status_code == 201
    vol = system.volumes.lookup("memVol")
    assert vol.read_all("example.str/index.m3u8") == b"#EXTM3U\n"
    assert vol.read_all("example.str/video/720p-07.cmfv") == b"\x00" * 500


def test_reput_replaces(env):
    system, url, rec = env
    requests.put(url + "/dash/p/index.m3u8", data=b"v1", timeout=5)
    r = requests.put(url + "/dash/p/index.m3u8", data=b"version2", timeout=5)
    assert r.status_code == 200
    assert system.volumes.lookup("memVol").read_all("p/index.m3u8") == b"version2"
    assert rec.wait_for(lambda ev: len(committed(rec, "p/index.m3u8")) == 2)


def test_over_limit_413_leaves_no_content(env):
    system, url, rec = env
    r = requests.put(url + "/dash/p/big.cmfv", data=(b"x" * 1001 for _ in range(1)), timeout=5)
    assert r.status_code == 413
    assert not system.volumes.lookup("memVol").exists("p/big.cmfv")
    assert rec.wait_for(lambda ev: rec.of(FileEvent, FileEventType.ABORTED))
    assert requests.get(url + "/p/big.cmfv", timeout=5).status_code == 404


def test_over_limit_keeps_previous_version(env):
    system, url, _ = env
    requests.put(url + "/dash/p/seg.cmfv", data=b"good", timeout=5)
    r = requests.put(url + "/dash/p/seg.cmfv", data=(b"y" * 600 for _ in range(2)), timeout=5)
    assert r.status_code == 413
    assert system.volumes.lookup("memVol").read_all("p/seg.cmfv") == b"good"


def test_exact_limit_accepted(env):
    _, url, _ = env
    assert requests.put(url + "/dash/p/edge.cmfv", data=b"e" * 1000, timeout=5).status_code == 201


def test_delete(env):
    system, url, rec = env
    requests.put(url + "/dash/p/old.cmfv", data=b"o", timeout=5)
    assert requests.delete(url + "/dash/p/old.cmfv", timeout=5).status_code == 204
    assert not system.volumes.lookup("memVol").exists("p/old.cmfv")
    assert requests.get(url + "/p/old.cmfv", timeout=5).status_code == 404
    assert requests.delete(url + "/dash/p/old.cmfv", timeout=5).status_code == 404
    assert rec.wait_for(lambda ev: len(rec.of(FileEvent, FileEventType.DELETED)) == 1)


def test_event_parity(env):
    _, url, rec = env
    for i in range(5):
        requests.put(url + f"/dash/p/{i}.cmfv", data=b"d", timeout=5)
    for i in range(2):
        requests.delete(url + f"/dash/p/{i}.cmfv", timeout=5)
    assert rec.wait_for(lambda ev: len(rec.of(FileEvent, FileEventType.DELETED)) == 2)
    assert len(rec.of(FileEvent, FileEventType.COMMITTED)) == 5
    assert len(rec.of(FileEvent, FileEventType.STARTED)) == 5


def test_empty_path_400_and_other_method_405(env):
    _, url, _ = env
    assert requests.put(url + "/dash/", data=b"x", timeout=5).status_code == 400
    assert requests.get(url + "/dash/p/x", timeout=5).status_code == 405


def test_concurrent_writer_409(env):
    system, url, rec = env
    gate = threading.Event()

    def body():
        yield b"a"
        gate.wait(10)
        yield b"b"

    result = {}
    th = threading.Thread(target=lambda: result.update(r=requests.put(url + "/dash/p/c.cmfv", data=body(),
                                                                       timeout=10)))
    th.start()
    vol = system.volumes.lookup("memVol")
    assert rec.wait_for(lambda ev: rec.of(FileEvent, FileEventType.STARTED))
    r2 = requests.put(url + "/dash/p/c.cmfv", data=b"other", timeout=5)
    gate.set()
    th.join(10)
    assert r2.status_code == 409
    assert result["r"].status_code == 201
    assert vol.read_all("p/c.cmfv") == b"ab"


def test_in_place_upload_visible_while_growing():
    with running_system(doc(useInPlaceWriters=True)) as system:
        url = server_url(system)
        gate = threading.Event()

        def body():
            yield b"part1"
            gate.wait(10)
            yield b"part2"

        th = threading.Thread(target=lambda: requests.put(url + "/dash/p/live.cmfv", data=body(), timeout=10))
        th.start()
        vol = system.volumes.lookup("memVol")
        assert wait_until(lambda: vol.exists("p/live.cmfv"), timeout=5)
        with vol.open("p/live.cmfv").reader() as r:
            first = r.read(5)
            assert first == b"part1"
            gate.set()
            assert first + r.read() == b"part1part2"
        th.join(10)

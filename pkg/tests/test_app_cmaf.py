import threading
import time

import pytest
import requests

from mediaingest.app import IngestPathError, UnsupportedSignalingError, parse_ingest_path
from mediaingest.event import (
    BoundaryEventType,
    FileEventType,
    FragmentEvent,
    InitSegmentEvent,
    StreamEvent,
    SwitchingSetEvent,
    TrackEvent,
)
from mediaingest.harness import SynthSpec, push_interface1, synth_track
from mediaingest.harness.synth import box

import mp4_oracle
from conftest import EventRecorder, running_system, server_url, wait_until
from configs import ingest_system

TRACK = "/cmaf/example.str/Switching(video)/Stream(v1.cmfv)"
PREFIX = "example.str/video/v1.cmfv"


@pytest.fixture
def sys_rec():
    with running_system(ingest_system(app_options={"presentationTimeout": "1s"})) as system:
        rec = EventRecorder(system.streams["cmaf"])
        yield system, rec
        rec.close()


def oracle_boundaries(track):
    ref_header = mp4_oracle.header_info(track.header)
    return [i for i, c in enumerate(track.chunks) if mp4_oracle.chunk_info(c, ref_header).first_sample_is_sync]


def stored(system, path):
    return system.volumes.lookup("memVol").read_all(path)


@pytest.mark.parametrize("path,expected", [
    ("/example.str/Switching(video)/Stream(1080p.cmfv)", ("example.str", "video", "1080p.cmfv")),
    ("/example.str/Switching(audio)/Stream(en.cmfa)", ("example.str", "audio", "en.cmfa")),
    ("/live/event1/Switching(v)/Stream(t.cmfv)", ("live/event1", "v", "t.cmfv")),
])
def test_parse_ingest_path(path, expected):
    a = parse_ingest_path(path)
    assert (a.presentation_id, a.switching_set_id, a.track_id) == expected


@pytest.mark.parametrize("bad", [
    "/example.str/Stream(x.cmfv)",
    "/example.str/Switching(video)",
    "/example.str/Switching()/Stream(x)",
    "/example.str/Switching(v)/Stream(x)/more",
    "/Switching(v)/Stream(x)",
    "/a/../Switching(v)/Stream(x)",
])
def test_parse_ingest_path_errors(bad):
    with pytest.raises(IngestPathError):
        parse_ingest_path(bad)


def test_manifest_signaling_unsupported():
    with pytest.raises(UnsupportedSignalingError):
        parse_ingest_path("/example.str/manifest.mpd")


def test_five_fragments(sys_rec):
    system, rec = sys_rec
    t = synth_track(SynthSpec(chunk_count=10, chunks_per_fragment=2))
    expected = oracle_boundaries(t)
    assert expected == [0, 2, 4, 6, 8]
    r = push_interface1(server_url(system) + TRACK, t)
    assert r["status"] == 200, r
    vol = system.volumes.lookup("memVol")
    assert vol.exists(f"{PREFIX}/init")
    assert [vol.exists(f"{PREFIX}/{i:010d}") for i in range(7)] == [False] + [True] * 5 + [False]
    assert rec.wait_for(lambda ev: len([e for e in ev if isinstance(e, FragmentEvent)
                                        and e.kind is FileEventType.COMMITTED]) == 5)
    assert len(rec.of(InitSegmentEvent, FileEventType.COMMITTED)) == 1
    assert len(rec.of(FragmentEvent, FileEventType.COMMITTED)) == 5
    # byte conservation
    body = stored(system, f"{PREFIX}/init") + b"".join(stored(system, f"{PREFIX}/{i:010d}") for i in range(1, 6))
    assert body == t.data
    # every fragment file starts at a sync sample
    ref_header = mp4_oracle.header_info(t.header)
    for i in range(1, 6):
        frag = stored(system, f"{PREFIX}/{i:010d}")
        assert mp4_oracle.chunk_info(frag, ref_header).first_sample_is_sync


def test_event_ordering(sys_rec):
    system, rec = sys_rec
    t = synth_track(SynthSpec(chunk_count=6, chunks_per_fragment=2))
    assert push_interface1(server_url(system) + TRACK, t)["status"] == 200
    rec.wait_for(lambda ev: len([e for e in ev if isinstance(e, FragmentEvent)]) == 6)
    kinds = [(type(e).__name__, e.kind.name) for e in rec.events
             if isinstance(e, (StreamEvent, SwitchingSetEvent, TrackEvent, InitSegmentEvent, FragmentEvent))]
    assert kinds[:3] == [("StreamEvent", "BEGIN"), ("SwitchingSetEvent", "BEGIN"), ("TrackEvent", "BEGIN")]
    frag_kinds = [k for k in kinds if k[0] in ("InitSegmentEvent", "FragmentEvent")]
    assert frag_kinds == [("InitSegmentEvent", "STARTED"), ("InitSegmentEvent", "COMMITTED")] + \
        [("FragmentEvent", k) for _ in range(3) for k in ("STARTED", "COMMITTED")]
    seqs = [e.fragment.sequence_number for e in rec.of(FragmentEvent)]
    assert seqs == [1, 1, 2, 2, 3, 3]


def test_unknown_box_mid_stream(sys_rec):
    system, rec = sys_rec
    t = synth_track(SynthSpec(chunk_count=4, chunks_per_fragment=2))
    body = t.header + b"".join(t.chunks[:3]) + box("free", b"junk")
    r = requests.put(server_url(system) + TRACK, data=iter([body]), timeout=10)
    assert r.status_code == 400
    vol = system.volumes.lookup("memVol")
    assert vol.read_all(f"{PREFIX}/0000000001") == t.chunks[0] + t.chunks[1]
    assert not vol.exists(f"{PREFIX}/0000000002")
    assert rec.wait_for(lambda ev: any(isinstance(e, FragmentEvent) and e.kind is FileEventType.ABORTED
                                       for e in ev))
    aborted = rec.of(FragmentEvent, FileEventType.ABORTED)
    assert [e.fragment.sequence_number for e in aborted] == [2]


def test_fragment_limit_413():
    t = synth_track(SynthSpec(chunk_count=4, chunks_per_fragment=4, payload_bytes_per_sample=200))
    limit = len(t.chunks[0]) * 2
    with running_system(ingest_system(app_options={"maxFragmentBytes": limit})) as system:
        rec = EventRecorder(system.streams["cmaf"])
        r = push_interface1(server_url(system) + TRACK, t)
        assert r["status"] == 413
        assert rec.wait_for(lambda ev: any(isinstance(e, FragmentEvent) and e.kind is FileEventType.ABORTED
                                           for e in ev))
        assert not system.volumes.lookup("memVol").exists(f"{PREFIX}/0000000001")
        rec.close()


def test_header_limit_413():
    with running_system(ingest_system(app_options={"maxHeaderBytes": 64})) as system:
        r = push_interface1(server_url(system) + TRACK, synth_track(SynthSpec(chunk_count=1)))
        assert r["status"] == 413


def test_wrong_method_405(sys_rec):
    system, _ = sys_rec
    r = requests.get(server_url(system) + TRACK, timeout=5)
    assert r.status_code == 405
    assert set(r.headers["Allow"].split(", ")) == {"POST", "PUT"}


def test_bad_path_400_and_manifest_501(sys_rec):
    system, _ = sys_rec
    t = synth_track(SynthSpec(chunk_count=1))
    assert requests.put(server_url(system) + "/cmaf/example.str/Stream(x.cmfv)", data=t.data,
                        timeout=5).status_code == 400
    assert requests.put(server_url(system) + "/cmaf/example.str/manifest.mpd", data=b"<MPD/>",
                        timeout=5).status_code == 501


def test_stream_must_start_with_sync(sys_rec):
    system, _ = sys_rec
    t = synth_track(SynthSpec(chunk_count=4, chunks_per_fragment=2))
    r = requests.put(server_url(system) + TRACK, data=t.header + t.chunks[1], timeout=5)
    assert r.status_code == 400


def test_concurrent_same_track_409(sys_rec):
    system, _ = sys_rec
    t = synth_track(SynthSpec(chunk_count=4, chunks_per_fragment=2))
    release = threading.Event()

    def slow():
        yield t.header
        yield t.chunks[0]
        release.wait(10)
        yield b"".join(t.chunks[1:])

    result = {}
    th = threading.Thread(target=lambda: result.update(r=push_interface1(server_url(system) + TRACK, slow())))
    th.start()
    app = system.apps["cmaf"]
    assert wait_until(lambda: app._active, timeout=5)
    r2 = requests.put(server_url(system) + TRACK, data=t.data, timeout=5)
    release.set()
    th.join(10)
    assert r2.status_code == 409
    assert result["r"]["status"] == 200


def test_reconnect_resumes_numbering(sys_rec):
    system, _ = sys_rec
    url = server_url(system) + TRACK
    assert push_interface1(url, synth_track(SynthSpec(chunk_count=4, chunks_per_fragment=2)))["status"] == 200
    assert push_interface1(url, synth_track(SynthSpec(chunk_count=4, chunks_per_fragment=2, seed=9)))["status"] == 200
    assert system.volumes.lookup("memVol").exists(f"{PREFIX}/0000000004")


def test_in_place_reader_sees_prefix(sys_rec):
    system, rec = sys_rec
    t = synth_track(SynthSpec(chunk_count=4, chunks_per_fragment=4))
    gate = threading.Event()

    def body():
        yield t.header
        yield t.chunks[0]
        gate.wait(10)
        for c in t.chunks[1:]:
            yield c

    th = threading.Thread(target=lambda: push_interface1(server_url(system) + TRACK, body()))
    th.start()
    assert rec.wait_for(lambda ev: any(isinstance(e, FragmentEvent) for e in ev))
    f = system.volumes.lookup("memVol").open(f"{PREFIX}/0000000001")
    with f.reader() as r:
        first = r.read(len(t.chunks[0]))
        assert t.chunks[0].startswith(first)
        gate.set()
        rest = r.read()
    th.join(10)
    assert first + rest == b"".join(t.chunks)


def test_gc_presentations(sys_rec):
    system, rec = sys_rec
    app = system.apps["cmaf"]
    assert push_interface1(server_url(system) + TRACK, synth_track(SynthSpec(chunk_count=2)))["status"] == 200
    assert app.gc_presentations(time.monotonic()) == []
    assert app.gc_presentations(time.monotonic() + 2 * app.presentation_timeout) == ["example.str"]
    assert rec.wait_for(lambda ev: any(isinstance(e, StreamEvent) and e.kind is BoundaryEventType.END for e in ev))
    ends = [type(e).__name__ for e in rec.events if getattr(e, "kind", None) is BoundaryEventType.END]
    assert ends == ["TrackEvent", "SwitchingSetEvent", "StreamEvent"]
    # files stay, the model is gone; a new ingest begins afresh
    assert system.volumes.lookup("memVol").exists(f"{PREFIX}/init")
    assert "example.str" not in app.presentations
    assert push_interface1(server_url(system) + TRACK, synth_track(SynthSpec(chunk_count=2)))["status"] == 200
    assert rec.wait_for(lambda ev: len([e for e in ev if isinstance(e, StreamEvent)
                                        and e.kind is BoundaryEventType.BEGIN]) == 2)


def test_active_presentation_never_collected(sys_rec):
    system, _ = sys_rec
    app = system.apps["cmaf"]
    t = synth_track(SynthSpec(chunk_count=2, chunks_per_fragment=1))
    gate = threading.Event()

    def body():
        yield t.header + t.chunks[0]
        gate.wait(10)
        yield t.chunks[1]

    th = threading.Thread(target=lambda: push_interface1(server_url(system) + TRACK, body()))
    th.start()
    assert wait_until(lambda: "example.str" in app.presentations and app._active, timeout=5)
    assert app.gc_presentations(time.monotonic() + 1e6) == []
    gate.set()
    th.join(10)


def test_background_gc_terminates_idle():
    with running_system(ingest_system(app_options={"presentationTimeout": "200ms", "gcInterval": "100ms"})) as system:
        rec = EventRecorder(system.streams["cmaf"])
        assert push_interface1(server_url(system) + TRACK, synth_track(SynthSpec(chunk_count=2)))["status"] == 200
        assert rec.wait_for(lambda ev: any(isinstance(e, StreamEvent) and e.kind is BoundaryEventType.END
                                           for e in ev), timeout=5)
        rec.close()

import os
import signal
import subprocess
import sys
import threading
import time

import pytest
import requests

from mediaingest.config import parse_config
from mediaingest.context import Cancelled, Context
from mediaingest.controller import EXIT_OK, EXIT_RUNTIME, System, group_run, live_threads, run_system
from mediaingest.harness import SynthSpec, synth_track
from mediaingest.runtime import UnknownVolumeError, VolumeRegistry
from mediaingest.volume import MemVolume

from conftest import running_system, wait_until
from configs import ingest_system, listing


def test_group_run_all_succeed():
    ran = []
    assert group_run([lambda ctx, i=i: ran.append(i) for i in range(3)], Context()) is None
    assert sorted(ran) == [0, 1, 2]


def test_group_run_first_failure_cancels_others():
    cancelled = []

    def waiter(ctx):
        ctx.wait()
        cancelled.append(ctx.reason)

    def boom(ctx):
        raise RuntimeError("boom")

    err = group_run([waiter, boom, waiter], Context())
    assert isinstance(err, RuntimeError) and str(err) == "boom"
    assert len(cancelled) == 2


def test_group_run_external_cancel():
    ctx = Context()
    seen = []

    def waiter(c):
        c.wait()
        seen.append(True)

    threading.Timer(0.1, ctx.cancel).start()
    assert isinstance(group_run([waiter] * 3, ctx), Cancelled)
    assert len(seen) == 3


def test_group_run_needs_controllers():
    with pytest.raises(ValueError):
        group_run([], Context())


def test_registry_lookup():
    mem = MemVolume("memVol")
    reg = VolumeRegistry({"memVol": mem})
    assert reg.lookup("memVol") is mem
    with pytest.raises(UnknownVolumeError):
        reg.lookup("nope")
    got = []
    threads = [threading.Thread(target=lambda: got.append(reg.lookup("memVol"))) for _ in range(10)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(got) == 10 and all(v is mem for v in got)


def test_listing_topology(tmp_path):
    with running_system(listing("127.0.0.1:0", str(tmp_path / "fs"))) as system:
        assert len(system.servers) == 1
        assert sorted(system.apps) == ["cmaf", "serve"]
        assert len(system.functions) == 1 and system.functions[0].name == "manifest"
        assert len(system.streams["cmaf"]._subs) == 1
        assert sorted(v.name for v in system.volumes) == ["fsVol", "memVol"]
        url = system.servers[0].url
        t = synth_track(SynthSpec(chunk_count=2))
        r = requests.put(url + "/cmaf/ex/Switching(v)/Stream(a.cmfv)", data=t.data,
                         headers={"Host": "ingest.example.com"}, timeout=5)
        assert r.status_code == 200
        assert requests.get(url + "/ex/v/a.cmfv/init", timeout=5).content == t.header
        # cmaf is bound to its host; other hosts fall through to the serving app
        assert requests.put(url + "/cmaf/ex/Switching(v)/Stream(a.cmfv)", data=t.data,
                            timeout=5).status_code == 405
    assert system.finalized_volumes == ["fsVol", "memVol"]
    assert wait_until(lambda: not live_threads(), timeout=5)


def test_unknown_volume_type_fails_startup():
    cfg = parse_config(ingest_system(vol={"name": "memVol", "type": "tape"}))
    assert run_system(cfg, Context()) == EXIT_RUNTIME
    assert wait_until(lambda: not live_threads(), timeout=5)


def test_startup_failure_unwinds(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_bytes(b"")
    cfg = parse_config(ingest_system(extra_volumes=[
        {"name": "fsVol", "type": "fs", "options": {"rootPath": str(blocker / "sub")}}]))
    system = System(cfg)
    with pytest.raises(Exception):
        system.start()
    assert system.finalized_volumes == ["memVol"]
    assert wait_until(lambda: not live_threads(), timeout=5)


def test_run_system_clean_exit():
    ctx = Context()
    ready = []

    def on_ready(system):
        ready.append(system)
        threading.Timer(0.2, ctx.cancel).start()

    assert run_system(parse_config(ingest_system()), ctx, on_ready) == EXIT_OK
    assert ready[0].stopped.is_set()
    assert ready[0].finalized_volumes == ["memVol"]
    assert not live_threads()


def test_function_failure_is_runtime_error():
    system_holder = []

    def on_ready(system):
        system_holder.append(system)
        system.fail(RuntimeError("injected"))

    assert run_system(parse_config(ingest_system()), Context(), on_ready) == EXIT_RUNTIME


# process level


def _cli(*args, **kw):
    return subprocess.Popen([sys.executable, "-m", "mediaingest.cli", *args], stdout=subprocess.PIPE,
                            stderr=subprocess.PIPE, text=True, **kw)


def test_cli_config_errors(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text(ingest_system().replace("- memVol", "- missing", 1))
    p = _cli("--config", str(bad))
    out, err = p.communicate(timeout=30)
    assert p.returncode == 1
    assert "unresolved volume reference 'missing'" in err
    p = _cli("--config", str(tmp_path / "absent.yaml"))
    p.communicate(timeout=30)
    assert p.returncode == 1


@pytest.mark.parametrize("sig", [signal.SIGINT, signal.SIGTERM])
def test_cli_signal_shutdown(tmp_path, sig):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(ingest_system())
    p = _cli("--config", str(cfg), "--log-level", "info")
    # wait for the listening line on stderr
    deadline = time.monotonic() + 20
    lines = []
    while time.monotonic() < deadline:
        line = p.stderr.readline()
        lines.append(line)
        if "server listening" in line:
            break
    assert any("server listening" in x for x in lines), lines
    os.kill(p.pid, sig)
    _, err = p.communicate(timeout=30)
    assert p.returncode == 0
    assert "system stopped" in err

import os
import socket
import threading

import pytest

from mediaingest.volume import FsVolume, NotFoundError, VolumeError


@pytest.fixture
def fsvol(tmp_path):
    v = FsVolume("fsVol", str(tmp_path / "root"))
    v.init()
    yield v
    v.finalize()


def _files(root):
    out = []
    for d, _, names in os.walk(root):
        out += [os.path.relpath(os.path.join(d, n), root) for n in names]
    return sorted(out)


def test_uncreatable_root(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_bytes(b"")
    v = FsVolume("bad", str(blocker / "sub"))
    with pytest.raises(VolumeError):
        v.init()


def test_layout_is_verbatim(fsvol):
    fsvol.write_all("ex.str/video/init", b"hdr")
    assert open(os.path.join(fsvol.root_path, "ex.str", "video", "init"), "rb").read() == b"hdr"


def test_snapshot_commit_renames_temp(fsvol):
    fsvol.write_all("a.bin", b"old")
    w = fsvol.open("a.bin").writer(in_place=False)
    w.write(b"new")
    names = _files(fsvol.root_path)
    assert len(names) == 2 and any(n.endswith(".tmp") for n in names)
    w.commit()
    assert _files(fsvol.root_path) == ["a.bin"]
    assert fsvol.read_all("a.bin") == b"new"


def test_in_place_abort_restores_and_commit_drops_parked(fsvol):
    fsvol.write_all("a.bin", b"original")
    w = fsvol.open("a.bin").writer(in_place=True)
    w.write(b"replacement")
    assert len(_files(fsvol.root_path)) == 2
    w.abort()
    assert fsvol.read_all("a.bin") == b"original"
    w = fsvol.open("a.bin").writer(in_place=True)
    w.write(b"replacement")
    w.commit()
    assert _files(fsvol.root_path) == ["a.bin"]
    assert fsvol.read_all("a.bin") == b"replacement"


def test_blocked_read_counts_written_bytes(fsvol):
    f = fsvol.open_create("live")
    w = f.writer(in_place=True)
    w.write(b"a" * 100)
    r = f.reader()
    assert r.read(100) == b"a" * 100
    out = []
    t = threading.Thread(target=lambda: out.append(r.read(10)))
    t.start()
    t.join(0.1)
    assert t.is_alive()
    w.write(b"b" * 50)
    t.join(5)
    assert 0 < len(out[0]) <= 10
    w.commit()
    rest = r.read()
    assert len(out[0]) + len(rest) == 50
    assert r.read(1) == b""
    r.close()


def test_open_files_map_shrinks(fsvol):
    for i in range(1000):
        f = fsvol.open_create(f"f{i % 7}")
        if i % 2:
            with f.writer(in_place=bool(i % 3)) as w:
                w.write(b"x")
        else:
            f.reader().close()
    assert fsvol.open_files == {}


def test_orphaned_temps_swept_on_init(tmp_path):
    root = tmp_path / "r"
    (root / "d").mkdir(parents=True)
    (root / "d" / "seg.0123456789abcdef.tmp").write_bytes(b"junk")
    (root / "d" / "seg").write_bytes(b"keep")
    v = FsVolume("v", str(root))
    v.init()
    assert _files(str(root)) == ["d/seg"]


def test_symlinks_refused(fsvol, tmp_path):
    outside = tmp_path / "outside"
    outside.write_bytes(b"secret")
    os.symlink(outside, os.path.join(fsvol.root_path, "link"))
    with pytest.raises(NotFoundError):
        fsvol.open("link")
    os.symlink(tmp_path, os.path.join(fsvol.root_path, "dirlink"))
    with pytest.raises(NotFoundError):
        fsvol.open_create("dirlink/x")


def test_parent_dirs_not_pruned(fsvol):
    fsvol.write_all("a/b/c", b"1")
    fsvol.delete("a/b/c")
    assert os.path.isdir(os.path.join(fsvol.root_path, "a", "b"))


def test_copy_to_socket_uses_whole_file(fsvol):
    data = os.urandom(300_000)
    fsvol.write_all("big", data)
    a, b = socket.socketpair()
    got = bytearray()

    def drain():
        while True:
            chunk = b.recv(65536)
            if not chunk:
                return
            got.extend(chunk)

    t = threading.Thread(target=drain)
    t.start()
    with fsvol.open("big").reader() as r:
        assert r.copy_to(a) == len(data)
    a.close()
    t.join(5)
    b.close()
    assert bytes(got) == data

"""``mediaingest-client``: synthesize CMAF tracks and drive ingests.

Subcommands print a JSON report on stdout. Exit status is 1 when a
transport error occurred, 0 otherwise (HTTP error statuses are reported,
not treated as failures of the tool).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from .client import delete_interface2, push_interface1, push_interface2
from .synth import SynthSpec, synth_track


def _add_spec_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", choices=["video", "audio"], default="video")
    p.add_argument("--timescale", type=int)
    p.add_argument("--chunks", type=int, default=10, help="number of CMAF chunks")
    p.add_argument("--chunks-per-fragment", type=int, default=2)
    p.add_argument("--samples-per-chunk", type=int)
    p.add_argument("--sample-duration", type=int)
    p.add_argument("--payload-bytes", type=int, default=64, help="payload bytes per sample")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--track-id", type=int, default=1)


def spec_from_args(a: argparse.Namespace) -> SynthSpec:
    kw = {
        "chunk_count": a.chunks,
        "chunks_per_fragment": a.chunks_per_fragment,
        "payload_bytes_per_sample": a.payload_bytes,
        "seed": a.seed,
        "track_id": a.track_id,
    }
    for name, attr in (("timescale", "timescale"), ("samples_per_chunk", "samples_per_chunk"),
                       ("sample_duration", "sample_duration")):
        if getattr(a, attr) is not None:
            kw[name] = getattr(a, attr)
    return SynthSpec.audio(**kw) if a.kind == "audio" else SynthSpec(**kw)


def cmd_synth(a: argparse.Namespace) -> int:
    track = synth_track(spec_from_args(a))
    data = track.data
    if a.out:
        with open(a.out, "wb") as f:
            f.write(data)
    _emit({
        "bytes": len(data),
        "sha256": hashlib.sha256(data).hexdigest(),
        "header_bytes": len(track.header),
        "chunks": len(track.chunks),
        "fragments": track.fragment_count,
        "boundaries": track.boundaries,
        "out": a.out,
    })
    return 0


def cmd_push1(a: argparse.Namespace) -> int:
    spec = spec_from_args(a)
    if a.tracks == 1:
        report = push_interface1(a.url, synth_track(spec), rate=a.rate)
        _emit(report)
        return 1 if report["error"] else 0
    # fan out: "{i}" in the URL is replaced by the track index
    def one(i: int):
        s = SynthSpec(**{**spec.__dict__, "seed": spec.seed + i})
        return push_interface1(a.url.replace("{i}", str(i)), synth_track(s), rate=a.rate)
    with ThreadPoolExecutor(max_workers=a.tracks) as pool:
        reports = list(pool.map(one, range(a.tracks)))
    _emit({"tracks": reports, "ok": all(r["ok"] for r in reports)})
    return 1 if any(r["error"] for r in reports) else 0


def cmd_push2(a: argparse.Namespace) -> int:
    files = []
    for path in a.files:
        if os.path.isdir(path):
            for root, _, names in os.walk(path):
                for n in sorted(names):
                    full = os.path.join(root, n)
                    with open(full, "rb") as f:
                        files.append((os.path.relpath(full, path).replace(os.sep, "/"), f.read()))
        else:
            with open(path, "rb") as f:
                files.append((os.path.basename(path), f.read()))
    report = push_interface2(a.url, files)
    _emit(report)
    return 1 if any(r["error"] for r in report["requests"]) else 0


def cmd_delete(a: argparse.Namespace) -> int:
    report = delete_interface2(a.url)
    _emit(report)
    return 1 if report["error"] else 0


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="mediaingest-client", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("synth", help="write a synthetic CMAF track")
    _add_spec_args(p)
    p.add_argument("--out", help="output file (omit to only print the report)")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("push1", help="push a synthetic track as one long-running request")
    _add_spec_args(p)
    p.add_argument("--url", required=True)
    p.add_argument("--rate", type=float, help="pacing in bytes per second")
    p.add_argument("--tracks", type=int, default=1, help="parallel tracks; '{i}' in --url is the index")
    p.set_defaults(fn=cmd_push1)

    p = sub.add_parser("push2", help="upload files (or directory trees), one request per file")
    p.add_argument("--url", required=True, help="base URL the relative file paths are appended to")
    p.add_argument("files", nargs="+")
    p.set_defaults(fn=cmd_push2)

    p = sub.add_parser("delete", help="delete one ingested file")
    p.add_argument("--url", required=True)
    p.set_defaults(fn=cmd_delete)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())

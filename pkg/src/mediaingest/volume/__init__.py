from .base import (
    AbortedWriteError,
    FileReader,
    FileWriter,
    InvalidPathError,
    NotFoundError,
    ReaderClosedError,
    SeekError,
    Volume,
    VolumeError,
    VolumeFile,
    VolumePath,
    WriterClosedError,
    WriterExistsError,
)
from .fs import FsVolume
from .mem import DEFAULT_BLOCK_SIZE, MemVolume
from .null import NullVolume

__all__ = [
    "AbortedWriteError",
    "DEFAULT_BLOCK_SIZE",
    "FileReader",
    "FileWriter",
    "FsVolume",
    "InvalidPathError",
    "MemVolume",
    "NotFoundError",
    "NullVolume",
    "ReaderClosedError",
    "SeekError",
    "Volume",
    "VolumeError",
    "VolumeFile",
    "VolumePath",
    "WriterClosedError",
    "WriterExistsError",
    "new_volume",
]


def new_volume(name: str, kind: str, options: dict | None = None) -> Volume:
    options = options or {}
    if kind == "null":
        return NullVolume(name)
    if kind == "mem":
        return MemVolume(name, block_size=int(options.get("blockSize", DEFAULT_BLOCK_SIZE)))
    if kind == "fs":
        return FsVolume(name, root_path=options["rootPath"])
    raise ValueError(f"unknown volume type {kind!r}")

"""Shared execution-context records handed to applications and functions."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import TYPE_CHECKING, Any, Mapping

from .context import Context
from .event import ChannelStream, Event, StreamStateError
from .volume import Volume

if TYPE_CHECKING:
    from .config import AppCfg


class UnknownVolumeError(KeyError):
    def __str__(self) -> str:
        return f"unknown volume {self.args[0]!r}"


class VolumeRegistry:
    """Name -> volume map, populated once at startup and read-only afterwards."""

    def __init__(self, volumes: Mapping[str, Volume] | None = None) -> None:
        self._volumes: Mapping[str, Volume] = MappingProxyType(dict(volumes or {}))

    def lookup(self, name: str) -> Volume:
        try:
            return self._volumes[name]
        except KeyError:
            raise UnknownVolumeError(name) from None

    def __contains__(self, name: object) -> bool:
        return name in self._volumes

    def __iter__(self):
        return iter(self._volumes.values())

    def __len__(self) -> int:
        return len(self._volumes)

    def names(self) -> list[str]:
        return list(self._volumes)


@dataclass(frozen=True)
class ExecContext:
    volumes: VolumeRegistry
    ctx: Context = field(default_factory=Context)
    stream: ChannelStream | None = None
    app: Any = None
    app_cfg: AppCfg | None = None
    apps: Mapping[str, Any] = field(default_factory=dict)
    logger: logging.Logger = field(default_factory=lambda: logging.getLogger("mediaingest"))

    def publish(self, e: Event) -> None:
        if self.stream is None:
            return
        try:
            self.stream.pub(e)
        except StreamStateError:
            self.logger.debug("event dropped, stream not running: %s", e.type_name)

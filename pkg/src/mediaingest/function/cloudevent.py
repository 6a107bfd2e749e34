"""Forward every event to a webhook as a structured-mode CloudEvent."""

from __future__ import annotations

import json
import uuid
from datetime import datetime, timezone
from typing import Any

import requests

from ..config import FunctionCfg
from ..event import Event, event_subject
from ..runtime import ExecContext
from .base import Function

SPEC_VERSION = "1.0"
CONTENT_TYPE = "application/cloudevents+json"
TYPE_PREFIX = "io.mediaingest."
DEFAULT_TIMEOUT_MS = 5000


def to_cloud_event(e: Event, source: str) -> dict[str, Any]:
    ce: dict[str, Any] = {
        "specversion": SPEC_VERSION,
        "id": str(uuid.uuid4()),
        "type": TYPE_PREFIX + e.type_name,
        "source": source,
        "time": datetime.now(timezone.utc).isoformat().replace("+00:00", "Z"),
        "datacontenttype": "application/json",
        "data": e.to_dict(),
    }
    subject = event_subject(e)
    if subject:
        ce["subject"] = subject
    return ce


class CloudEventFunction(Function):
    """One POST per event; failures are logged and the event is dropped."""

    def __init__(self, cfg: FunctionCfg, ectx: ExecContext) -> None:
        super().__init__(cfg, ectx)
        self.url = cfg.options["url"]
        app_name = ectx.app_cfg.name if ectx.app_cfg is not None else "unknown"
        self.source = cfg.options.get("source", f"/apps/{app_name}")
        self.timeout = self.duration_option("timeout", DEFAULT_TIMEOUT_MS)
        self._session = requests.Session()
        self.sent = 0
        self.dropped = 0

    def handle(self, e: Event) -> None:
        body = json.dumps(to_cloud_event(e, self.source))
        try:
            r = self._session.post(self.url, data=body.encode("utf-8"), timeout=self.timeout,
                                   headers={"Content-Type": CONTENT_TYPE})
        except requests.RequestException as exc:
            self.dropped += 1
            self.log.warning("cloud event dropped type=%s: %s", e.type_name, exc)
            return
        if not 200 <= r.status_code < 300:
            self.dropped += 1
            self.log.warning("cloud event dropped type=%s status=%d", e.type_name, r.status_code)
            return
        self.sent += 1

    def on_exit(self) -> None:
        self._session.close()

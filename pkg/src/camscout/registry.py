"""Durable registry of candidate and confirmed cameras.

The registry file is an append-only log: one JSON object per line holding
every :class:`CameraRecord` field plus ``event`` (``upsert`` or ``disable``).
Loading replays the log; the latest event per ``camera_id`` wins.

Single writer, many readers. Mutations go through one lock and readers get
copies of immutable records.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, replace
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable
from urllib.parse import urlsplit

from . import jsonl
from .models import (
    LivenessVerdict,
    MediaKind,
    parse_rfc3339,
    to_rfc3339,
    utcnow,
)
from .urls import CAMERA_SCHEMES, normalize_url

EVENTS = ("upsert", "disable")


def derive_camera_id(endpoint: str) -> str:
    """128-bit SHA-256 prefix of the normalized endpoint, as 32 lowercase hex chars."""
    return hashlib.sha256(normalize_url(endpoint).encode("utf-8")).hexdigest()[:32]


@dataclass(frozen=True)
class CameraRecord:
    endpoint: str
    media_kind: MediaKind
    discovered_at: datetime
    source_page: str
    verdict: LivenessVerdict | None = None
    enabled: bool = False
    camera_id: str = ""

    def __post_init__(self):
        kind = MediaKind(self.media_kind)
        object.__setattr__(self, "media_kind", kind)
        normalized = normalize_url(self.endpoint)
        if normalized != self.endpoint:
            raise ValueError(f"endpoint not normalized: {self.endpoint!r} (expected {normalized!r})")
        if urlsplit(self.endpoint).scheme not in CAMERA_SCHEMES:
            raise ValueError(f"unsupported scheme in {self.endpoint!r}")
        if self.discovered_at.tzinfo is None:
            raise ValueError("discovered_at must be timezone-aware UTC")
        if self.enabled and not kind.capturable:
            raise ValueError(f"{kind.value} records are never enabled")
        expected = derive_camera_id(self.endpoint)
        if not self.camera_id:
            object.__setattr__(self, "camera_id", expected)
        elif self.camera_id != expected:
            raise ValueError(f"camera_id {self.camera_id} does not match endpoint")

    @classmethod
    def new(
        cls,
        endpoint: str,
        media_kind: MediaKind,
        source_page: str,
        discovered_at: datetime | None = None,
        **kw: Any,
    ) -> CameraRecord:
        """Build a record, normalizing ``endpoint`` first."""
        return cls(
            normalize_url(endpoint),
            MediaKind(media_kind),
            discovered_at or utcnow(),
            source_page,
            **kw,
        )

    def to_dict(self, event: str = "upsert") -> dict[str, Any]:
        return {
            "event": event,
            "camera_id": self.camera_id,
            "endpoint": self.endpoint,
            "media_kind": self.media_kind.value,
            "discovered_at": to_rfc3339(self.discovered_at),
            "source_page": self.source_page,
            "verdict": self.verdict.to_dict() if self.verdict else None,
            "enabled": self.enabled,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> CameraRecord:
        verdict = d.get("verdict")
        return cls(
            endpoint=d["endpoint"],
            media_kind=MediaKind(d["media_kind"]),
            discovered_at=parse_rfc3339(d["discovered_at"]),
            source_page=d["source_page"],
            verdict=LivenessVerdict.from_dict(verdict) if verdict else None,
            enabled=bool(d["enabled"]),
            camera_id=d["camera_id"],
        )


def replay(events: Iterable[dict[str, Any]]) -> dict[str, CameraRecord]:
    """Fold a record-event sequence into the compacted view."""
    view: dict[str, CameraRecord] = {}
    for ev in events:
        if ev.get("event") not in EVENTS:
            continue
        record = CameraRecord.from_dict(ev)
        view[record.camera_id] = record
    return view


class Registry:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._view: dict[str, CameraRecord] = {}
        self.reload()

    def reload(self) -> None:
        view = replay(jsonl.read(self.path))
        with self._lock:
            self._view = view

    def _append(self, record: CameraRecord, event: str) -> None:
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            jsonl.append(self.path, [record.to_dict(event)])
            self._view[record.camera_id] = record

    def upsert_camera(self, record: CameraRecord) -> str:
        self._append(record, "upsert")
        return record.camera_id

    def upsert_many(self, records: Iterable[CameraRecord]) -> list[str]:
        records = list(records)
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            jsonl.append(self.path, [r.to_dict("upsert") for r in records])
            for r in records:
                self._view[r.camera_id] = r
        return [r.camera_id for r in records]

    def disable(self, camera_id: str) -> CameraRecord:
        with self._lock:
            current = self._view[camera_id]
        record = replace(current, enabled=False)
        self._append(record, "disable")
        return record

    def get(self, camera_id: str) -> CameraRecord | None:
        with self._lock:
            return self._view.get(camera_id)

    def __contains__(self, camera_id: str) -> bool:
        with self._lock:
            return camera_id in self._view

    def __len__(self) -> int:
        with self._lock:
            return len(self._view)

    def list_cameras(
        self,
        kinds: Iterable[MediaKind] | None = None,
        enabled_only: bool = False,
    ) -> list[CameraRecord]:
        """Compacted records matching the filter, ordered by camera_id."""
        wanted = None if kinds is None else {MediaKind(k) for k in kinds}
        with self._lock:
            records = list(self._view.values())
        return sorted(
            (
                r
                for r in records
                if (wanted is None or r.media_kind in wanted) and (r.enabled or not enabled_only)
            ),
            key=lambda r: r.camera_id,
        )

    def compact(self) -> int:
        """Rewrite the log as one upsert per camera; returns the record count."""
        with self._lock:
            records = sorted(self._view.values(), key=lambda r: r.camera_id)
            jsonl.rewrite(self.path, (r.to_dict("upsert") for r in records))
        return len(records)

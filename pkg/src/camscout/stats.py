"""Summaries over a registry and an archive manifest."""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .archiver import read_manifest
from .registry import Registry

log = logging.getLogger(__name__)

SECONDS_PER_WEEK = 7 * 24 * 3600


@dataclass
class Summary:
    cameras: int = 0
    by_media_kind: dict[str, int] = field(default_factory=dict)
    by_verdict: dict[str, int] = field(default_factory=dict)
    enabled: int = 0
    captures: int = 0
    ok_captures: int = 0
    success_rate: dict[str, float] = field(default_factory=dict)
    total_bytes: int = 0
    bytes_per_week: float | None = None
    missing: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)

    def render(self) -> str:
        lines = [f"cameras: {self.cameras} ({self.enabled} enabled)"]
        lines += [f"  media_kind {k}: {v}" for k, v in sorted(self.by_media_kind.items())]
        lines += [f"  verdict {k}: {v}" for k, v in sorted(self.by_verdict.items())]
        lines.append(f"captures: {self.captures} ({self.ok_captures} ok)")
        for cid, rate in sorted(self.success_rate.items()):
            lines.append(f"  {cid} success rate: {rate:.2f}")
        lines.append(f"total bytes archived: {self.total_bytes}")
        if self.bytes_per_week is not None:
            lines.append(f"capture rate: {self.bytes_per_week:.0f} bytes/week")
        else:
            lines.append("capture rate: n/a")
        for path in self.missing:
            lines.append(f"missing: {path}")
        return "\n".join(lines)


def summarize(registry_path: str | Path | None, manifest_path: str | Path | None) -> Summary:
    """Build a summary; missing inputs are noted and skipped."""
    s = Summary()
    if registry_path is not None:
        if Path(registry_path).exists():
            records = Registry(registry_path).list_cameras()
            s.cameras = len(records)
            s.enabled = sum(r.enabled for r in records)
            s.by_media_kind = dict(Counter(r.media_kind.value for r in records))
            s.by_verdict = dict(Counter(r.verdict.label.value if r.verdict else "Unverified" for r in records))
        else:
            log.warning("registry not found: %s", registry_path)
            s.missing.append(str(registry_path))

    if manifest_path is not None:
        if Path(manifest_path).exists():
            entries = read_manifest(manifest_path)
            s.captures = len(entries)
            per_camera: dict[str, list[int]] = defaultdict(lambda: [0, 0])
            for e in entries:
                per_camera[e.camera_id][1] += 1
                if e.ok:
                    per_camera[e.camera_id][0] += 1
                    s.ok_captures += 1
                    s.total_bytes += e.bytes_written
            s.success_rate = {cid: ok / total for cid, (ok, total) in per_camera.items()}
            stamps = [e.captured_at for e in entries if e.ok]
            if len(stamps) >= 2:
                span = (max(stamps) - min(stamps)).total_seconds()
                if span > 0:
                    s.bytes_per_week = s.total_bytes / span * SECONDS_PER_WEEK
        else:
            log.warning("manifest not found: %s", manifest_path)
            s.missing.append(str(manifest_path))
    return s

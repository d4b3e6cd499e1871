"""Value types shared across discovery, identification and archiving."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any


class MediaKind(str, enum.Enum):
    STILL_IMAGE = "StillImage"
    MJPEG_STREAM = "MjpegStream"
    HLS_STREAM = "HlsStream"
    RTSP_LINK = "RtspLink"
    RTMP_LINK = "RtmpLink"

    @property
    def capturable(self) -> bool:
        return self in CAPTURABLE_KINDS


CAPTURABLE_KINDS = frozenset(
    {MediaKind.STILL_IMAGE, MediaKind.MJPEG_STREAM, MediaKind.HLS_STREAM}
)


class Label(str, enum.Enum):
    LIVE = "Live"
    STATIC = "Static"
    INDETERMINATE = "Indeterminate"


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def to_rfc3339(ts: datetime) -> str:
    """Render a UTC timestamp with microseconds and a ``Z`` suffix."""
    if ts.tzinfo is None:
        raise ValueError("naive datetime; expected UTC")
    ts = ts.astimezone(timezone.utc)
    return ts.strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def parse_rfc3339(text: str) -> datetime:
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        raise ValueError(f"timestamp without offset: {text!r}")
    return ts.astimezone(timezone.utc)


@dataclass(frozen=True)
class CandidateLink:
    url: str
    media_kind: MediaKind
    source_page: str
    depth: int = 0


@dataclass(frozen=True)
class PairEvidence:
    """Comparator results for one adjacent pair of samples.

    ``percent_changed`` and ``luminance_delta`` are ``None`` when either body
    could not be decoded; ``changed`` is ``None`` when the pair is undecided.
    """

    checksum_equal: bool
    percent_changed: float | None
    luminance_delta: float | None
    changed: bool | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "checksum_equal": self.checksum_equal,
            "percent_changed": self.percent_changed,
            "luminance_delta": self.luminance_delta,
            "changed": self.changed,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> PairEvidence:
        return cls(
            checksum_equal=d["checksum_equal"],
            percent_changed=d.get("percent_changed"),
            luminance_delta=d.get("luminance_delta"),
            changed=d.get("changed"),
        )


@dataclass(frozen=True)
class LivenessVerdict:
    label: Label
    evidence: tuple[PairEvidence, ...] = ()
    policy_used: dict[str, Any] = field(default_factory=dict)
    # Free-form diagnostics: HLS sequence numbers, fetch failures, parse errors.
    detail: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label.value,
            "evidence": [e.to_dict() for e in self.evidence],
            "policy_used": dict(self.policy_used),
            "detail": dict(self.detail),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> LivenessVerdict:
        return cls(
            label=Label(d["label"]),
            evidence=tuple(PairEvidence.from_dict(e) for e in d.get("evidence", [])),
            policy_used=dict(d.get("policy_used", {})),
            detail=dict(d.get("detail", {})),
        )

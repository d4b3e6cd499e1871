"""HLS playlist parsing and the playlist-advance liveness check."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable
from urllib.parse import urljoin

from ..fetch import FetchError, HttpFetcher
from ..models import Label, LivenessVerdict

MAX_PLAYLIST_BYTES = 1024 * 1024


class HlsParseError(ValueError):
    pass


@dataclass(frozen=True)
class Playlist:
    is_master: bool
    variants: tuple[str, ...] = ()
    media_sequence: int = 0
    segments: tuple[str, ...] = ()
    ended: bool = False


def parse_playlist(text: str) -> Playlist:
    lines = [ln.strip() for ln in text.lstrip("\ufeff").splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or lines[0] != "#EXTM3U":
        raise HlsParseError("missing #EXTM3U header")

    variants: list[str] = []
    segments: list[str] = []
    sequence = 0
    ended = False
    expect: str | None = None
    for line in lines[1:]:
        if line.startswith("#"):
            tag, _, value = line.partition(":")
            if tag == "#EXT-X-STREAM-INF":
                expect = "variant"
            elif tag == "#EXTINF":
                expect = "segment"
            elif tag == "#EXT-X-MEDIA-SEQUENCE":
                try:
                    sequence = int(value)
                except ValueError:
                    raise HlsParseError(f"bad media sequence {value!r}") from None
            elif tag == "#EXT-X-ENDLIST":
                ended = True
            continue
        if expect == "variant":
            variants.append(line)
        elif expect == "segment":
            segments.append(line)
        else:
            raise HlsParseError(f"URI line without preceding tag: {line!r}")
        expect = None

    if variants and segments:
        raise HlsParseError("playlist mixes variants and media segments")
    return Playlist(bool(variants), tuple(variants), sequence, tuple(segments), ended)


def fetch_playlist(url: str, fetcher: HttpFetcher, timeout: float | None = None) -> Playlist:
    resp = fetcher.get(url, timeout=timeout, max_bytes=MAX_PLAYLIST_BYTES)
    try:
        text = resp.body.decode("utf-8")
    except UnicodeDecodeError:
        raise HlsParseError("playlist is not UTF-8 text") from None
    return parse_playlist(text)


def resolve_media_playlist(
    url: str, fetcher: HttpFetcher, timeout: float | None = None
) -> tuple[str, Playlist]:
    """Return ``(media_url, playlist)``, following a master playlist's first variant."""
    playlist = fetch_playlist(url, fetcher, timeout)
    if not playlist.is_master:
        return url, playlist
    media_url = urljoin(url, playlist.variants[0])
    media = fetch_playlist(media_url, fetcher, timeout)
    if media.is_master:
        raise HlsParseError("variant playlist is itself a master playlist")
    return media_url, media


def latest_segment_url(url: str, fetcher: HttpFetcher, timeout: float | None = None) -> str:
    media_url, playlist = resolve_media_playlist(url, fetcher, timeout)
    if not playlist.segments:
        raise HlsParseError("media playlist lists no segments")
    return urljoin(media_url, playlist.segments[-1])


def check_hls_live(
    playlist_url: str,
    interval: float,
    fetcher: HttpFetcher,
    timeout: float | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> LivenessVerdict:
    """Fetch the media playlist twice, ``interval`` seconds apart.

    Live when the media sequence advanced or the segment list changed,
    Static when both fetches agree, Indeterminate on any fetch or parse error.
    """
    policy = {"interval": interval}
    try:
        media_url, first = resolve_media_playlist(playlist_url, fetcher, timeout)
        sleep(interval)
        second = fetch_playlist(media_url, fetcher, timeout)
    except FetchError as exc:
        return LivenessVerdict(Label.INDETERMINATE, (), policy, {"error": exc.kind, "message": str(exc)})
    except HlsParseError as exc:
        return LivenessVerdict(Label.INDETERMINATE, (), policy, {"error": "parse", "message": str(exc)})

    detail = {
        "media_url": media_url,
        "sequence_before": first.media_sequence,
        "sequence_after": second.media_sequence,
        "segments_before": len(first.segments),
        "segments_after": len(second.segments),
        "ended": second.ended,
    }
    if second.media_sequence > first.media_sequence or second.segments != first.segments:
        return LivenessVerdict(Label.LIVE, (), policy, detail)
    return LivenessVerdict(Label.STATIC, (), policy, detail)

"""URL normalization and camera-link pattern matching."""

from __future__ import annotations

from urllib.parse import SplitResult, urljoin, urlsplit, urlunsplit

from .models import MediaKind

DEFAULT_PORTS = {"http": 80, "https": 443, "rtsp": 554, "rtmp": 1935}
CAMERA_SCHEMES = frozenset({"http", "https", "rtsp", "rtmp"})
IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png")
MJPEG_SUFFIXES = (".mjpg", ".mjpeg")


class MalformedURL(ValueError):
    pass


def remove_dot_segments(path: str) -> str:
    """RFC 3986 section 5.2.4 dot-segment removal."""
    out: list[str] = []
    while path:
        if path.startswith("../"):
            path = path[3:]
        elif path.startswith("./"):
            path = path[2:]
        elif path.startswith("/./"):
            path = path[2:]
        elif path == "/.":
            path = "/"
        elif path.startswith("/../"):
            path = path[3:]
            if out:
                out.pop()
        elif path == "/..":
            path = "/"
            if out:
                out.pop()
        elif path in (".", ".."):
            path = ""
        else:
            start = 1 if path.startswith("/") else 0
            cut = path.find("/", start)
            if cut == -1:
                cut = len(path)
            out.append(path[:cut])
            path = path[cut:]
    return "".join(out)


def normalize_url(raw: str, base: str | None = None) -> str:
    """Resolve ``raw`` against ``base`` and canonicalize it.

    Lowercases scheme and host, strips the fragment and any default port,
    and collapses dot-segments. Idempotent.
    """
    raw = raw.strip() if raw else ""
    if not raw:
        raise MalformedURL("empty URL")
    joined = urljoin(base, raw) if base else raw
    try:
        parts = urlsplit(joined)
        port = parts.port
    except ValueError as exc:
        raise MalformedURL(f"{raw!r}: {exc}") from None
    scheme = parts.scheme.lower()
    if not scheme or not parts.hostname:
        raise MalformedURL(f"not an absolute URL: {joined!r}")

    host = parts.hostname.lower()
    if ":" in host:
        host = f"[{host}]"
    if port is not None and DEFAULT_PORTS.get(scheme) != port:
        host = f"{host}:{port}"
    netloc = host
    if parts.username is not None:
        userinfo = parts.username
        if parts.password is not None:
            userinfo += ":" + parts.password
        netloc = f"{userinfo}@{host}"

    path = remove_dot_segments(parts.path) if parts.path else ""
    if not path:
        path = "/"
    return urlunsplit(SplitResult(scheme, netloc, path, parts.query, ""))


def host_of(url: str) -> str:
    return urlsplit(url).netloc.rpartition("@")[2]


def stream_kind(url: str) -> MediaKind | None:
    """Media kind implied by a stream-like URL, or None.

    Covers the patterns worth scanning for anywhere in a page, including
    script text: rtsp/rtmp schemes, HLS playlists and MJPEG endpoints.
    """
    parts = urlsplit(url)
    scheme = parts.scheme.lower()
    if scheme == "rtsp":
        return MediaKind.RTSP_LINK
    if scheme == "rtmp":
        return MediaKind.RTMP_LINK
    if scheme not in ("http", "https"):
        return None
    path = parts.path.lower()
    if path.endswith(".m3u8"):
        return MediaKind.HLS_STREAM
    if path.endswith(MJPEG_SUFFIXES) or "mjpg" in path.split("/"):
        return MediaKind.MJPEG_STREAM
    return None


def is_image_url(url: str) -> bool:
    parts = urlsplit(url)
    return parts.scheme.lower() in ("http", "https") and parts.path.lower().endswith(
        IMAGE_SUFFIXES
    )

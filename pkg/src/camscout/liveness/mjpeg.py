"""Pull single JPEG frames out of ``multipart/x-mixed-replace`` streams."""

from __future__ import annotations

import re
from typing import Iterator

from ..fetch import FetchError, HttpFetcher

SOI = b"\xff\xd8"
EOI = b"\xff\xd9"
MAX_BUFFER = 8 * 1024 * 1024


class MjpegError(FetchError):
    """``kind`` is one of ``non_multipart``, ``boundary_not_found``,
    ``frame_timeout`` or ``no_frame``."""

    def __init__(self, kind: str, message: str):
        super().__init__(kind, message)


def parse_boundary(content_type: str) -> bytes:
    ctype, _, params = content_type.partition(";")
    if not ctype.strip().lower().startswith("multipart/"):
        raise MjpegError("non_multipart", f"content type is {ctype.strip()!r}")
    m = re.search(r'boundary\s*=\s*"?([^";]+)"?', params, re.IGNORECASE)
    if not m or not m.group(1).strip("- \t"):
        raise MjpegError("boundary_not_found", "no boundary parameter in content type")
    return m.group(1).strip().encode("latin-1")


def is_jpeg(data: bytes) -> bool:
    return len(data) >= 4 and data.startswith(SOI) and data.endswith(EOI)


class MultipartReader:
    """Incremental multipart parser.

    Feed raw chunks; complete parts come back as ``(headers, body)``. Part
    bodies are delimited by their ``Content-Length`` header when present and
    by the next boundary line otherwise.
    """

    def __init__(self, boundary: bytes):
        # Servers disagree on whether the header value already carries the
        # leading dashes, so match the token after any run of dashes.
        token = re.escape(boundary.lstrip(b"-"))
        self._delim = re.compile(rb"(?:^|\r?\n)-*" + token + rb"(--)?[ \t]*\r?\n")
        self._buf = bytearray()
        self._pos = 0
        self.seen_boundary = False

    def feed(self, chunk: bytes) -> Iterator[tuple[dict[str, str], bytes]]:
        self._buf += chunk
        while True:
            part = self._next_part()
            if part is None:
                break
            yield part
        if self._pos > 0:
            del self._buf[: self._pos]
            self._pos = 0
        if len(self._buf) > MAX_BUFFER:
            raise MjpegError(
                "no_frame" if self.seen_boundary else "boundary_not_found",
                f"no complete part within {MAX_BUFFER} buffered bytes",
            )

    def _next_part(self) -> tuple[dict[str, str], bytes] | None:
        # Offsets are recomputed from the delimiter on every call because
        # feed() compacts the buffer between calls.
        m = self._delim.search(self._buf, self._pos)
        if m is None:
            return None
        self.seen_boundary = True
        if m.group(1):  # closing delimiter
            self._pos = m.end()
            return None
        head = self._find_blank_line(m.end())
        if head is None:
            self._pos = m.start()
            return None
        hdr_end, body_start = head
        headers = self._parse_headers(bytes(self._buf[m.end() : hdr_end]))
        length = headers.get("content-length", "")
        if length.isdigit():
            end = body_start + int(length)
            if len(self._buf) < end:
                self._pos = m.start()
                return None
            body = bytes(self._buf[body_start:end])
            self._pos = end
        else:
            nxt = self._delim.search(self._buf, body_start)
            if nxt is None:
                self._pos = m.start()
                return None
            body = bytes(self._buf[body_start : nxt.start()])
            self._pos = nxt.start()
        return headers, body

    def _find_blank_line(self, start: int) -> tuple[int, int] | None:
        crlf = self._buf.find(b"\r\n\r\n", start)
        lf = self._buf.find(b"\n\n", start)
        if start < len(self._buf) and self._buf[start : start + 2] == b"\r\n":
            return start, start + 2  # part with no headers
        candidates = [(crlf, crlf + 4)] if crlf != -1 else []
        if lf != -1:
            candidates.append((lf, lf + 2))
        return min(candidates) if candidates else None

    @staticmethod
    def _parse_headers(raw: bytes) -> dict[str, str]:
        headers = {}
        for line in raw.decode("latin-1").splitlines():
            name, sep, value = line.partition(":")
            if sep:
                headers[name.strip().lower()] = value.strip()
        return headers


def valid_jpeg_part(headers: dict[str, str], body: bytes) -> bytes | None:
    ctype = headers.get("content-type", "image/jpeg").lower()
    if "jpeg" not in ctype and "jpg" not in ctype:
        return None
    frame = body.rstrip(b"\r\n")
    return frame if is_jpeg(frame) else None


def sample_mjpeg_frame(url: str, fetcher: HttpFetcher, timeout: float | None = None) -> bytes:
    """Return the first complete, well-framed JPEG part served at ``url``."""
    with fetcher.stream(url, timeout) as resp:
        reader = MultipartReader(parse_boundary(resp.content_type_header))
        try:
            while True:
                chunk = resp.read_chunk()
                if not chunk:
                    break
                for headers, body in reader.feed(chunk):
                    frame = valid_jpeg_part(headers, body)
                    if frame is not None:
                        return frame
        except FetchError as exc:
            if exc.kind == "timeout":
                raise MjpegError("frame_timeout", str(exc)) from exc
            raise
    if not reader.seen_boundary:
        raise MjpegError("boundary_not_found", f"{url}: stream ended before any boundary")
    raise MjpegError("no_frame", f"{url}: stream ended without a complete JPEG part")

"""HTTP fetching shared by the crawler, the liveness samplers and the archiver.

Every failure surfaces as :class:`FetchError` with a short ``kind`` string
(``connect``, ``timeout``, ``http``, ``too_large``, ``protocol``) so callers can
record it without inspecting library-specific exceptions.
"""

from __future__ import annotations

import contextlib
import threading
import time
from dataclasses import dataclass
from typing import Iterator, Mapping

import requests

DEFAULT_USER_AGENT = "camscout/0.1 (+network camera survey)"
DEFAULT_TIMEOUT = 10.0
CHUNK = 64 * 1024


class FetchError(Exception):
    def __init__(self, kind: str, message: str, status: int | None = None):
        super().__init__(f"{kind}: {message}")
        self.kind = kind
        self.status = status


@dataclass
class Response:
    url: str
    status: int
    headers: Mapping[str, str]
    body: bytes

    @property
    def content_type(self) -> str:
        return self.headers.get("Content-Type", "").split(";")[0].strip().lower()


class StreamResponse:
    """An open streaming response; read with :meth:`read_chunk` until ``b""``."""

    def __init__(self, resp: requests.Response, deadline: float | None):
        self._resp = resp
        self.url = resp.url
        self.status = resp.status_code
        self.headers = resp.headers
        self.deadline = deadline

    @property
    def content_type_header(self) -> str:
        return self.headers.get("Content-Type", "")

    def read_chunk(self, size: int = CHUNK) -> bytes:
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise FetchError("timeout", f"deadline exceeded reading {self.url}")
        try:
            return self._resp.raw.read1(size)
        except requests.exceptions.RequestException as exc:
            raise _translate(exc, self.url) from exc
        except Exception as exc:  # urllib3 read errors
            name = type(exc).__name__.lower()
            kind = "timeout" if "timeout" in name else "protocol"
            raise FetchError(kind, f"{self.url}: {exc}") from exc

    def close(self) -> None:
        self._resp.close()


def _translate(exc: Exception, url: str) -> FetchError:
    # ConnectTimeout is both a Timeout and a ConnectionError; timeout wins.
    if isinstance(exc, requests.exceptions.Timeout):
        return FetchError("timeout", f"{url}: {exc}")
    if isinstance(exc, requests.exceptions.ConnectionError):
        text = str(exc).lower()
        if "read timed out" in text:
            return FetchError("timeout", f"{url}: {exc}")
        return FetchError("connect", f"{url}: {exc}")
    return FetchError("protocol", f"{url}: {exc}")


class HttpFetcher:
    """Thread-safe GET client; each thread gets its own pooled session."""

    def __init__(
        self,
        user_agent: str = DEFAULT_USER_AGENT,
        timeout: float = DEFAULT_TIMEOUT,
    ):
        self.user_agent = user_agent
        self.timeout = timeout
        self._local = threading.local()

    def _session(self) -> requests.Session:
        session = getattr(self._local, "session", None)
        if session is None:
            session = requests.Session()
            session.headers["User-Agent"] = self.user_agent
            self._local.session = session
        return session

    def _open(self, url: str, timeout: float | None) -> requests.Response:
        timeout = self.timeout if timeout is None else timeout
        try:
            resp = self._session().get(url, stream=True, timeout=timeout)
        except requests.exceptions.RequestException as exc:
            raise _translate(exc, url) from exc
        if not 200 <= resp.status_code < 300:
            resp.close()
            raise FetchError("http", f"{url}: HTTP {resp.status_code}", resp.status_code)
        return resp

    def get(
        self,
        url: str,
        timeout: float | None = None,
        max_bytes: int | None = None,
        accept_types: tuple[str, ...] | None = None,
    ) -> Response:
        """Fetch ``url`` fully.

        ``max_bytes`` caps the body (``too_large`` beyond it). When
        ``accept_types`` is given and the content type does not start with
        any of them, the body is not read and comes back empty.
        """
        timeout = self.timeout if timeout is None else timeout
        deadline = time.monotonic() + timeout
        resp = self._open(url, timeout)
        with contextlib.closing(resp):
            headers = dict(resp.headers)
            ctype = headers.get("Content-Type", "").lower()
            if accept_types is not None and not ctype.startswith(accept_types):
                return Response(resp.url, resp.status_code, headers, b"")
            declared = resp.headers.get("Content-Length")
            if max_bytes is not None and declared and declared.isdigit():
                if int(declared) > max_bytes:
                    raise FetchError("too_large", f"{url}: {declared} bytes declared")
            buf = bytearray()
            try:
                for chunk in resp.iter_content(CHUNK):
                    buf += chunk
                    if max_bytes is not None and len(buf) > max_bytes:
                        raise FetchError("too_large", f"{url}: body exceeds {max_bytes} bytes")
                    if time.monotonic() > deadline:
                        raise FetchError("timeout", f"{url}: body not complete within {timeout}s")
            except requests.exceptions.RequestException as exc:
                raise _translate(exc, url) from exc
            return Response(resp.url, resp.status_code, headers, bytes(buf))

    @contextlib.contextmanager
    def stream(self, url: str, timeout: float | None = None) -> Iterator[StreamResponse]:
        """Open ``url`` for incremental reading; the overall deadline is ``timeout``."""
        timeout = self.timeout if timeout is None else timeout
        resp = self._open(url, timeout)
        sr = StreamResponse(resp, time.monotonic() + timeout)
        try:
            yield sr
        finally:
            sr.close()

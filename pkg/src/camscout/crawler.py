"""Breadth-first crawl of seed sites, emitting camera-like candidate links.

Pages are parsed as static HTML; a browser-backed :class:`PageRenderer` can be
substituted. Stream URLs are also scanned out of raw page text, since players
usually embed them in script blocks.
"""

from __future__ import annotations

import logging
import re
import threading
import time
from collections import deque
from concurrent.futures import FIRST_COMPLETED, Future, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from html.parser import HTMLParser
from typing import Protocol
from urllib.robotparser import RobotFileParser

from .fetch import DEFAULT_TIMEOUT, DEFAULT_USER_AGENT, FetchError, HttpFetcher
from .models import CandidateLink, MediaKind
from .urls import MalformedURL, host_of, is_image_url, normalize_url, stream_kind

log = logging.getLogger(__name__)

MAX_PAGE_BYTES = 8 * 1024 * 1024
HTML_TYPES = ("text/html", "application/xhtml+xml")

_URL_IN_TEXT = re.compile(r"""(?:rtsp|rtmp|https?)://[^\s"'<>\\)]+""", re.IGNORECASE)

# Attributes that may carry a URL, by tag. Anchors and frames also feed the
# frontier; everything here is checked for stream patterns.
_URL_ATTRS = {
    "a": ("href",),
    "area": ("href",),
    "img": ("src", "data-src"),
    "source": ("src",),
    "video": ("src", "poster"),
    "embed": ("src",),
    "iframe": ("src",),
    "frame": ("src",),
    "param": ("value",),
    "object": ("data",),
}
_STILL_TAGS = frozenset({"img", "a", "source"})
_PAGE_TAGS = frozenset({"a", "area", "iframe", "frame"})


@dataclass(frozen=True)
class CrawlConfig:
    seeds: tuple[str, ...]
    max_depth: int = 1
    max_pages: int = 100
    same_host_only: bool = False
    per_host_min_delay_ms: float = 500.0
    request_timeout: float = DEFAULT_TIMEOUT
    user_agent: str = DEFAULT_USER_AGENT
    fan_out: int = 8

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(self.seeds))
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.max_pages < 1:
            raise ValueError("max_pages must be >= 1")
        if self.per_host_min_delay_ms < 0:
            raise ValueError("per_host_min_delay_ms must be >= 0")
        if self.fan_out < 1:
            raise ValueError("fan_out must be >= 1")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        for seed in self.seeds:
            normalize_url(seed)


class _LinkCollector(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.attr_urls: list[tuple[str, str]] = []

    def handle_starttag(self, tag, attrs):
        names = _URL_ATTRS.get(tag)
        if not names:
            return
        for name, value in attrs:
            if name in names and value:
                self.attr_urls.append((tag, value))

    handle_startendtag = handle_starttag


def _collect(html: str) -> list[tuple[str, str]]:
    parser = _LinkCollector()
    try:
        parser.feed(html)
        parser.close()
    except Exception as exc:  # noqa: BLE001 - lenient by contract
        log.debug("html parse stopped early: %s", exc)
    return parser.attr_urls


def extract_candidate_links(html: str, base: str, depth: int = 0) -> list[CandidateLink]:
    """Camera-like links on a page, deduplicated by normalized URL."""
    found: dict[str, CandidateLink] = {}

    def add(raw: str, tag: str | None) -> None:
        try:
            url = normalize_url(raw, base)
        except MalformedURL:
            return
        if url in found:
            return
        kind = stream_kind(url)
        if kind is None and tag in _STILL_TAGS and is_image_url(url):
            kind = MediaKind.STILL_IMAGE
        if kind is not None:
            found[url] = CandidateLink(url, kind, base, depth)

    for tag, raw in _collect(html):
        add(raw, tag)
    for m in _URL_IN_TEXT.finditer(html):
        add(m.group(0).rstrip(".,;"), None)
    return list(found.values())


def extract_page_links(html: str, base: str, restrict_host: str | None = None) -> list[str]:
    """Normalized http(s) links to follow; optionally only those on ``restrict_host``."""
    out: dict[str, None] = {}
    for tag, raw in _collect(html):
        if tag not in _PAGE_TAGS:
            continue
        try:
            url = normalize_url(raw, base)
        except MalformedURL:
            continue
        if not url.startswith(("http://", "https://")):
            continue
        if restrict_host is not None and host_of(url) != restrict_host:
            continue
        out.setdefault(url, None)
    return list(out)


@dataclass
class Page:
    url: str
    status: int
    content_type: str
    text: str


class PageRenderer(Protocol):
    """Turns a URL into document text. Raise :class:`FetchError` on failure."""

    def render(self, url: str) -> Page: ...


class StaticRenderer:
    """Plain GET; non-HTML bodies are not downloaded."""

    def __init__(self, fetcher: HttpFetcher, timeout: float = DEFAULT_TIMEOUT):
        self.fetcher = fetcher
        self.timeout = timeout

    def render(self, url: str) -> Page:
        resp = self.fetcher.get(
            url, timeout=self.timeout, max_bytes=MAX_PAGE_BYTES, accept_types=HTML_TYPES
        )
        text = resp.body.decode("utf-8", errors="replace")
        return Page(resp.url, resp.status, resp.content_type, text)


@dataclass
class CrawlReportEntry:
    url: str
    depth: int
    status: int | None
    error: str | None
    candidates_found: int

    def to_dict(self) -> dict:
        return {
            "url": self.url,
            "depth": self.depth,
            "status": self.status,
            "error": self.error,
            "candidates_found": self.candidates_found,
        }


@dataclass
class _HostState:
    robots: RobotFileParser | None = None
    robots_checked: bool = False
    busy: bool = False
    ready_at: float = 0.0


class Crawler:
    """One crawl over ``config.seeds``.

    At most one request per host is in flight, consecutive requests to a host
    are separated by at least ``per_host_min_delay_ms`` measured from the end
    of the previous response, and up to ``fan_out`` hosts are fetched at once.
    The robots.txt fetch does not count against ``max_pages``.
    """

    def __init__(
        self,
        config: CrawlConfig,
        fetcher: HttpFetcher | None = None,
        renderer: PageRenderer | None = None,
    ):
        self.config = config
        self.fetcher = fetcher or HttpFetcher(config.user_agent, config.request_timeout)
        self.renderer = renderer or StaticRenderer(self.fetcher, config.request_timeout)
        self.report: list[CrawlReportEntry] = []
        self.fetched: list[str] = []
        self._hosts: dict[str, _HostState] = {}
        self._lock = threading.Lock()

    @property
    def _delay(self) -> float:
        return self.config.per_host_min_delay_ms / 1000.0

    def _host(self, host: str) -> _HostState:
        with self._lock:
            return self._hosts.setdefault(host, _HostState())

    def _allowed(self, url: str) -> bool:
        state = self._host(host_of(url))
        if state.robots is None:
            return True
        return state.robots.can_fetch(self.config.user_agent, url)

    def _fetch_robots(self, url: str, state: _HostState) -> None:
        scheme = url.split("://", 1)[0]
        robots_url = f"{scheme}://{host_of(url)}/robots.txt"
        parser = RobotFileParser(robots_url)
        try:
            resp = self.fetcher.get(robots_url, timeout=self.config.request_timeout, max_bytes=512 * 1024)
            parser.parse(resp.body.decode("utf-8", errors="replace").splitlines())
            state.robots = parser
        except FetchError as exc:
            log.debug("robots.txt unavailable for %s (%s); allowing all", robots_url, exc.kind)
        state.robots_checked = True
        time.sleep(self._delay)

    def _visit(self, url: str, depth: int) -> tuple[CrawlReportEntry, list[CandidateLink], list[str], bool]:
        state = self._host(host_of(url))
        if not state.robots_checked:
            self._fetch_robots(url, state)
        if not self._allowed(url):
            return CrawlReportEntry(url, depth, None, "robots_disallowed", 0), [], [], False
        restrict = host_of(url) if self.config.same_host_only else None
        try:
            page = self.renderer.render(url)
        except FetchError as exc:
            return CrawlReportEntry(url, depth, exc.status, exc.kind, 0), [], [], True
        finally:
            with self._lock:
                self.fetched.append(url)
        if page.content_type and not page.content_type.startswith(HTML_TYPES):
            return CrawlReportEntry(url, depth, page.status, "not_html", 0), [], [], True
        candidates = extract_candidate_links(page.text, url, depth)
        links = extract_page_links(page.text, url, restrict) if depth < self.config.max_depth else []
        return CrawlReportEntry(url, depth, page.status, None, len(candidates)), candidates, links, True

    def run(self) -> list[CandidateLink]:
        cfg = self.config
        frontier: deque[tuple[str, int]] = deque()
        seen: set[str] = set()
        seed_hosts: set[str] = set()
        for seed in cfg.seeds:
            url = normalize_url(seed)
            seed_hosts.add(host_of(url))
            if url not in seen:
                seen.add(url)
                frontier.append((url, 0))

        candidates: dict[str, CandidateLink] = {}
        inflight: dict[Future, tuple[str, int, str]] = {}
        budget_used = 0

        with ThreadPoolExecutor(max_workers=cfg.fan_out) as pool:
            while frontier or inflight:
                now = time.monotonic()
                next_ready = None
                skipped: deque[tuple[str, int]] = deque()
                while frontier and len(inflight) < cfg.fan_out:
                    if budget_used + len(inflight) >= cfg.max_pages:
                        break
                    url, depth = frontier.popleft()
                    host = host_of(url)
                    state = self._host(host)
                    if state.busy or state.ready_at > now:
                        if not state.busy:
                            next_ready = min(next_ready or state.ready_at, state.ready_at)
                        skipped.append((url, depth))
                        continue
                    if state.robots_checked and not self._allowed(url):
                        self.report.append(CrawlReportEntry(url, depth, None, "robots_disallowed", 0))
                        continue
                    state.busy = True
                    inflight[pool.submit(self._visit, url, depth)] = (url, depth, host)
                skipped.extend(frontier)
                frontier = skipped

                if budget_used + len(inflight) >= cfg.max_pages and not inflight:
                    break
                if not inflight:
                    if not frontier:
                        break
                    time.sleep(max(0.0, (next_ready or now) - time.monotonic()))
                    continue

                timeout = None if next_ready is None else max(0.0, next_ready - time.monotonic())
                done, _ = wait(list(inflight), timeout=timeout, return_when=FIRST_COMPLETED)
                for fut in done:
                    url, depth, host = inflight.pop(fut)
                    state = self._host(host)
                    state.busy = False
                    state.ready_at = time.monotonic() + self._delay
                    try:
                        entry, found, links, counted = fut.result()
                    except Exception as exc:  # noqa: BLE001 - a bad page never aborts the crawl
                        log.warning("crawl of %s failed: %s", url, exc)
                        entry, found, links, counted = CrawlReportEntry(url, depth, None, "internal", 0), [], [], True
                    budget_used += counted
                    self.report.append(entry)
                    for c in found:
                        candidates.setdefault(c.url, c)
                    for link in links:
                        if link in candidates or link in seen:
                            continue
                        if is_image_url(link) or stream_kind(link) is not None:
                            continue
                        if cfg.same_host_only and host_of(link) not in seed_hosts:
                            continue
                        seen.add(link)
                        frontier.append((link, depth + 1))
        return list(candidates.values())


def crawl(
    config: CrawlConfig,
    fetcher: HttpFetcher | None = None,
    renderer: PageRenderer | None = None,
) -> list[CandidateLink]:
    return Crawler(config, fetcher, renderer).run()

"""A local HTTP server that impersonates a fleet of network cameras.

Every endpoint has a known ground-truth label, and the server keeps a request
log plus per-endpoint concurrency gauges so tests can check crawler
politeness and archiver concurrency from the server side.

Routes::

    /                         index page linking every endpoint
    /robots.txt               disallows /private/
    /cam/static/<i>.jpg       fixed JPEG                          (Static)
    /cam/rotating/<i>.jpg     JPEG regenerated every rotation     (Live)
    /mjpg/<i>/video.mjpg      multipart/x-mixed-replace stream    (Live)
    /hls/<i>/master.m3u8      master playlist -> live.m3u8        (Live)
    /hls/<i>/live.m3u8        media playlist, sequence advances
    /hls/<i>/seg<n>.ts        segment bytes
    /pages/decoy<i>.html      HTML without camera links
    /private/hidden.html      robots-disallowed page
    /__manifest               JSON snapshot of the fleet manifest (not logged)
"""

from __future__ import annotations

import functools
import hashlib
import io
import json
import random
import threading
import time
import zlib
from dataclasses import asdict, dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any

from PIL import Image, ImageDraw

MJPEG_BOUNDARY = "camscoutframe"
ROBOTS_TXT = "User-agent: *\nDisallow: /private/\n"
HLS_WINDOW = 3
TS_PACKETS = 8

KIND_STATIC = "static_image"
KIND_ROTATING = "rotating_image"
KIND_MJPEG = "mjpeg_stream"
KIND_HLS = "hls_stream"
KIND_DECOY = "decoy_page"

_LABELS = {
    KIND_STATIC: "Static",
    KIND_ROTATING: "Live",
    KIND_MJPEG: "Live",
    KIND_HLS: "Live",
    KIND_DECOY: None,
}


@dataclass(frozen=True)
class FleetSpec:
    static_images: int = 0
    rotating_images: int = 0
    rotation_period: float = 5.0
    mjpeg_streams: int = 0
    frame_period: float = 1.0
    hls_streams: int = 0
    segment_period: float = 4.0
    decoy_pages: int = 0
    rtsp_links: int = 0
    host: str = "127.0.0.1"
    port: int = 0
    seed: int = 0
    width: int = 160
    height: int = 120
    # Fault knobs, applied to camera endpoints only.
    delay_ms: float = 0.0
    error_rate: float = 0.0
    endpoint_delays_ms: dict[str, float] = field(default_factory=dict)
    stream_max_seconds: float = 60.0

    def __post_init__(self):
        counts = (self.static_images, self.rotating_images, self.mjpeg_streams,
                  self.hls_streams, self.decoy_pages, self.rtsp_links)
        if any(c < 0 for c in counts):
            raise ValueError("endpoint counts must be >= 0")
        if min(self.rotation_period, self.frame_period, self.segment_period) <= 0:
            raise ValueError("periods must be > 0")
        if not 0 <= self.error_rate <= 1:
            raise ValueError("error_rate must be in [0, 1]")


@dataclass(frozen=True)
class Endpoint:
    path: str
    kind: str
    index: int

    @property
    def label(self) -> str | None:
        return _LABELS[self.kind]

    @property
    def endpoint_id(self) -> int:
        return zlib.crc32(self.path.encode())


@dataclass
class FleetManifest:
    endpoints: list[dict[str, Any]]
    requests: list[dict[str, Any]]
    concurrency: dict[str, int]
    max_camera_concurrency: int

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@functools.lru_cache(maxsize=4096)
def generate_image(seed: int, endpoint_id: int, frame_index: int,
                   width: int = 160, height: int = 120) -> bytes:
    """Deterministic synthetic camera frame as JPEG bytes.

    The background gray level cycles through three values 60 apart and a
    white bar steps a quarter-width each frame, so consecutive frames differ
    on most pixels by far more than 10 channel units.
    """
    rng = random.Random(f"{seed}:{endpoint_id}")
    tint = [rng.randrange(0, 40) for _ in range(3)]
    level = 40 + 60 * (frame_index % 3)
    img = Image.new("RGB", (width, height), tuple(level + t for t in tint))
    draw = ImageDraw.Draw(img)
    for _ in range(4):
        x0 = rng.randrange(0, width * 3 // 4)
        y0 = rng.randrange(height // 4, height * 3 // 4)
        color = tuple(rng.randrange(0, 256) for _ in range(3))
        draw.rectangle([x0, y0, x0 + width // 8, y0 + height // 8], fill=color)
    bar_w = max(1, width // 4)
    x = (frame_index * bar_w) % width
    draw.rectangle([x, 0, x + bar_w - 1, height // 5], fill=(255, 255, 255))
    draw.text((4, height - 14), f"{endpoint_id % 10000}:{frame_index}", fill=(255, 255, 0))
    buf = io.BytesIO()
    img.save(buf, format="JPEG", quality=90)
    return buf.getvalue()


def generate_segment(seed: int, endpoint_id: int, sequence: int) -> bytes:
    """Fake MPEG-TS segment: sync-byte-framed 188-byte packets."""
    out = bytearray()
    for p in range(TS_PACKETS):
        payload = hashlib.sha256(f"{seed}:{endpoint_id}:{sequence}:{p}".encode()).digest()
        out += b"\x47" + (payload * 6)[:187]
    return bytes(out)


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: _FleetServer

    def log_message(self, format, *args):  # noqa: A002
        pass

    def do_GET(self):  # noqa: N802
        fleet = self.server.fleet
        path = self.path.split("?", 1)[0]
        if path == "/__manifest":
            self._send(200, "application/json", json.dumps(fleet.manifest().to_dict()).encode())
            return
        entry, key = fleet._begin(path)
        status = 500
        try:
            status = fleet._route(self, path)
        except (BrokenPipeError, ConnectionResetError):
            status = 499
        finally:
            fleet._end(entry, key, status)

    def _send(self, status: int, ctype: str, body: bytes, extra: dict[str, str] | None = None) -> int:
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Cache-Control", "no-cache")
        for k, v in (extra or {}).items():
            self.send_header(k, v)
        self.end_headers()
        self.wfile.write(body)
        return status


class _FleetServer(ThreadingHTTPServer):
    daemon_threads = True
    request_queue_size = 512
    fleet: Fleet


class Fleet:
    """A running (or startable) mock fleet."""

    def __init__(self, spec: FleetSpec):
        self.spec = spec
        self.endpoints: list[Endpoint] = []
        for i in range(spec.static_images):
            self.endpoints.append(Endpoint(f"/cam/static/{i}.jpg", KIND_STATIC, i))
        for i in range(spec.rotating_images):
            self.endpoints.append(Endpoint(f"/cam/rotating/{i}.jpg", KIND_ROTATING, i))
        for i in range(spec.mjpeg_streams):
            self.endpoints.append(Endpoint(f"/mjpg/{i}/video.mjpg", KIND_MJPEG, i))
        for i in range(spec.hls_streams):
            self.endpoints.append(Endpoint(f"/hls/{i}/master.m3u8", KIND_HLS, i))
        for i in range(spec.decoy_pages):
            self.endpoints.append(Endpoint(f"/pages/decoy{i}.html", KIND_DECOY, i))
        self._by_path = {e.path: e for e in self.endpoints}

        self._lock = threading.Lock()
        self._log: list[dict[str, Any]] = []
        self._last_ts = 0.0
        self._active: dict[str, int] = {}
        self._peak: dict[str, int] = {}
        self._camera_active = 0
        self._camera_peak = 0
        self._emitted: dict[str, list[str]] = {}
        self._rng = random.Random(spec.seed)
        self.epoch = time.time()
        self._server: _FleetServer | None = None
        self._thread: threading.Thread | None = None

    # -- lifecycle -------------------------------------------------------

    def start(self) -> Fleet:
        server = _FleetServer((self.spec.host, self.spec.port), _Handler)
        server.fleet = self
        self._server = server
        self.epoch = time.time()
        self._thread = threading.Thread(target=server.serve_forever, args=(0.05,), name="mockfleet", daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None

    def __enter__(self) -> Fleet:
        return self if self._server else self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    @property
    def port(self) -> int:
        assert self._server is not None, "fleet not started"
        return self._server.server_address[1]

    @property
    def base_url(self) -> str:
        return f"http://{self.spec.host}:{self.port}"

    @property
    def index_url(self) -> str:
        return self.base_url + "/"

    def url(self, path: str) -> str:
        return self.base_url + path

    # -- ground truth ----------------------------------------------------

    def endpoint(self, path: str) -> Endpoint:
        try:
            return self._by_path[path]
        except KeyError:
            raise KeyError(f"unknown fleet path {path!r}") from None

    def ground_truth(self, path: str) -> str | None:
        return self.endpoint(path).label

    def cameras(self, kinds: tuple[str, ...] | None = None) -> list[Endpoint]:
        return [e for e in self.endpoints if e.kind != KIND_DECOY and (kinds is None or e.kind in kinds)]

    def frame_index(self, endpoint: Endpoint, at: float | None = None) -> int:
        elapsed = (time.time() if at is None else at) - self.epoch
        if endpoint.kind == KIND_STATIC:
            return 0
        period = {
            KIND_ROTATING: self.spec.rotation_period,
            KIND_MJPEG: self.spec.frame_period,
            KIND_HLS: self.spec.segment_period,
        }[endpoint.kind]
        return max(0, int(elapsed // period))

    def image_for(self, endpoint: Endpoint, frame_index: int) -> bytes:
        return generate_image(self.spec.seed, endpoint.endpoint_id, frame_index,
                              self.spec.width, self.spec.height)

    def current_digest(self, path: str) -> str | None:
        ep = self.endpoint(path)
        if ep.kind in (KIND_STATIC, KIND_ROTATING, KIND_MJPEG):
            return hashlib.sha256(self.image_for(ep, self.frame_index(ep))).hexdigest()
        if ep.kind == KIND_HLS:
            seq = self.frame_index(ep)
            return hashlib.sha256(generate_segment(self.spec.seed, ep.endpoint_id, seq + HLS_WINDOW - 1)).hexdigest()
        return None

    def served_digests(self, path: str) -> set[str]:
        """Every digest the endpoint could have served so far."""
        ep = self.endpoint(path)
        last = self.frame_index(ep)
        if ep.kind == KIND_HLS:
            return {hashlib.sha256(generate_segment(self.spec.seed, ep.endpoint_id, n)).hexdigest()
                    for n in range(last + HLS_WINDOW)}
        return {hashlib.sha256(self.image_for(ep, k)).hexdigest() for k in range(last + 1)}

    def emitted_frames(self, path: str) -> list[str]:
        with self._lock:
            return list(self._emitted.get(path, []))

    # -- request log -----------------------------------------------------

    def _is_camera_path(self, path: str) -> bool:
        return path.startswith(("/cam/", "/mjpg/", "/hls/"))

    def _begin(self, path: str) -> tuple[dict[str, Any], str]:
        with self._lock:
            ts = max(time.time(), self._last_ts + 1e-6)
            self._last_ts = ts
            entry = {"ts": ts, "path": path, "status": None, "outcome": "pending"}
            self._log.append(entry)
            n = self._active.get(path, 0) + 1
            self._active[path] = n
            self._peak[path] = max(self._peak.get(path, 0), n)
            if self._is_camera_path(path):
                self._camera_active += 1
                self._camera_peak = max(self._camera_peak, self._camera_active)
        return entry, path

    def _end(self, entry: dict[str, Any], path: str, status: int) -> None:
        with self._lock:
            entry["status"] = status
            entry["outcome"] = "ok" if 200 <= status < 300 else "error"
            entry["end"] = time.time()
            self._active[path] -= 1
            if self._is_camera_path(path):
                self._camera_active -= 1

    def request_log(self) -> list[dict[str, Any]]:
        with self._lock:
            return [dict(e) for e in self._log]

    def reset_log(self) -> None:
        with self._lock:
            self._log.clear()
            self._peak = dict(self._active)
            self._camera_peak = self._camera_active

    def max_concurrency(self, path: str | None = None) -> int:
        with self._lock:
            if path is None:
                return self._camera_peak
            return self._peak.get(path, 0)

    def manifest(self) -> FleetManifest:
        endpoints = [
            {"path": e.path, "kind": e.kind, "label": e.label, "digest": self.current_digest(e.path)}
            for e in self.endpoints
        ]
        with self._lock:
            return FleetManifest(
                endpoints=endpoints,
                requests=[dict(e) for e in self._log],
                concurrency=dict(self._peak),
                max_camera_concurrency=self._camera_peak,
            )

    # -- routing ---------------------------------------------------------

    def _inject_faults(self, handler: _Handler, path: str) -> int | None:
        delay = self.spec.endpoint_delays_ms.get(path, self.spec.delay_ms)
        if delay > 0:
            time.sleep(delay / 1000.0)
        if self.spec.error_rate > 0:
            with self._lock:
                fail = self._rng.random() < self.spec.error_rate
            if fail:
                return handler._send(503, "text/plain", b"injected failure\n")
        return None

    def _route(self, h: _Handler, path: str) -> int:
        if path in ("/", "/index.html"):
            return h._send(200, "text/html; charset=utf-8", self._index_html().encode())
        if path == "/robots.txt":
            return h._send(200, "text/plain", ROBOTS_TXT.encode())
        if path == "/private/hidden.html":
            return h._send(200, "text/html", b'<html><body><img src="/private/cam.jpg"></body></html>')
        ep = self._by_path.get(path)
        if ep is not None and ep.kind == KIND_DECOY:
            return h._send(200, "text/html; charset=utf-8", self._decoy_html(ep).encode())
        if self._is_camera_path(path):
            failed = self._inject_faults(h, path)
            if failed is not None:
                return failed
        if ep is not None and ep.kind in (KIND_STATIC, KIND_ROTATING):
            return h._send(200, "image/jpeg", self.image_for(ep, self.frame_index(ep)))
        if ep is not None and ep.kind == KIND_MJPEG:
            return self._serve_mjpeg(h, ep)
        if path.startswith("/hls/"):
            return self._serve_hls(h, path)
        return h._send(404, "text/plain", b"not found\n")

    def _serve_mjpeg(self, h: _Handler, ep: Endpoint) -> int:
        h.close_connection = True
        h.send_response(200)
        h.send_header("Content-Type", f"multipart/x-mixed-replace; boundary={MJPEG_BOUNDARY}")
        h.send_header("Cache-Control", "no-cache")
        h.send_header("Connection", "close")
        h.end_headers()
        deadline = time.monotonic() + self.spec.stream_max_seconds
        while time.monotonic() < deadline:
            frame = self.image_for(ep, self.frame_index(ep))
            with self._lock:
                self._emitted.setdefault(ep.path, []).append(hashlib.sha256(frame).hexdigest())
            h.wfile.write(
                f"--{MJPEG_BOUNDARY}\r\nContent-Type: image/jpeg\r\n"
                f"Content-Length: {len(frame)}\r\n\r\n".encode() + frame + b"\r\n"
            )
            h.wfile.flush()
            time.sleep(self.spec.frame_period)
        return 200

    def _serve_hls(self, h: _Handler, path: str) -> int:
        parts = path.strip("/").split("/")
        if len(parts) != 3:
            return h._send(404, "text/plain", b"not found\n")
        master = f"/hls/{parts[1]}/master.m3u8"
        ep = self._by_path.get(master)
        if ep is None:
            return h._send(404, "text/plain", b"not found\n")
        seq = self.frame_index(ep)
        name = parts[2]
        mpegurl = "application/vnd.apple.mpegurl"
        if name == "master.m3u8":
            body = "#EXTM3U\n#EXT-X-STREAM-INF:BANDWIDTH=800000,RESOLUTION=640x360\nlive.m3u8\n"
            return h._send(200, mpegurl, body.encode())
        if name == "live.m3u8":
            period = self.spec.segment_period
            lines = ["#EXTM3U", "#EXT-X-VERSION:3",
                     f"#EXT-X-TARGETDURATION:{max(1, round(period))}",
                     f"#EXT-X-MEDIA-SEQUENCE:{seq}"]
            for n in range(seq, seq + HLS_WINDOW):
                lines += [f"#EXTINF:{period:.3f},", f"seg{n}.ts"]
            return h._send(200, mpegurl, ("\n".join(lines) + "\n").encode())
        if name.startswith("seg") and name.endswith(".ts") and name[3:-3].isdigit():
            n = int(name[3:-3])
            if n < seq + HLS_WINDOW:
                return h._send(200, "video/mp2t", generate_segment(self.spec.seed, ep.endpoint_id, n))
        return h._send(404, "text/plain", b"not found\n")

    def _index_html(self) -> str:
        items = []
        for e in self.endpoints:
            if e.kind in (KIND_STATIC, KIND_ROTATING):
                items.append(f'<li><a href="{e.path}"><img src="{e.path}" alt="camera {e.index}"></a></li>')
            elif e.kind == KIND_MJPEG:
                items.append(f'<li><a href="{e.path}">Live stream {e.index}</a></li>')
            elif e.kind == KIND_HLS:
                items.append(
                    f'<li><video controls><source src="{e.path}" type="application/x-mpegURL"></video></li>'
                )
            else:
                items.append(f'<li><a href="{e.path}">About page {e.index}</a></li>')
        items.append('<li><a href="/private/hidden.html">Staff only</a></li>')
        items.append('<li><a href="mailto:ops@example.invalid">Contact</a></li>')
        script = "".join(
            f'players.push({{src: "rtsp://{self.spec.host}:8554/stream{i}"}});\n'
            for i in range(self.spec.rtsp_links)
        )
        return (
            "<!DOCTYPE html>\n<html><head><title>Camera index</title>\n"
            f"<script>var players = [];\n{script}</script></head>\n<body>\n"
            "<h1>Public cameras</h1>\n<ul>\n" + "\n".join(items) + "\n</ul>\n</body></html>\n"
        )

    def _decoy_html(self, ep: Endpoint) -> str:
        nxt = (ep.index + 1) % max(1, self.spec.decoy_pages)
        return (
            f"<html><head><title>About {ep.index}</title></head><body>"
            f"<p>Nothing to see on page {ep.index}.</p>"
            f'<a href="/">Home</a> <a href="/pages/decoy{nxt}.html">Next</a>'
            "</body></html>"
        )


def start_fleet(spec: FleetSpec) -> Fleet:
    return Fleet(spec).start()

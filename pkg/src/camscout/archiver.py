"""Periodic snapshot capture from every enabled camera.

Images land under ``<output_root>/<camera_id>/YYYY/MM/DD/HHMMSS.<ext>`` and
each capture attempt is indexed by one line in ``<output_root>/manifest.jsonl``.
An image file is always complete before its manifest line is written (temp
file plus rename), and :func:`recover` removes whatever an interrupted run
left unindexed.
"""

from __future__ import annotations

import hashlib
import logging
import os
import tempfile
import threading
import time
from concurrent.futures import FIRST_COMPLETED, Future, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable

from . import jsonl
from .fetch import FetchError, HttpFetcher
from .liveness.hls import HlsParseError, latest_segment_url
from .liveness.mjpeg import sample_mjpeg_frame
from .models import CAPTURABLE_KINDS, MediaKind, parse_rfc3339, to_rfc3339, utcnow
from .registry import CameraRecord, Registry

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"
TEMP_SUFFIX = ".part"
RETRY_BACKOFF = 0.25


class ArchiveError(Exception):
    pass


@dataclass(frozen=True)
class ArchiveConfig:
    output_root: Path
    interval: float = 600.0
    workers: int = 16
    per_camera_timeout: float = 10.0
    retries: int = 1
    cycles: int | None = None  # None runs until stopped

    def __post_init__(self):
        object.__setattr__(self, "output_root", Path(self.output_root))
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.interval <= 0:
            raise ValueError("interval must be > 0")
        if self.per_camera_timeout <= 0:
            raise ValueError("per_camera_timeout must be > 0")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")
        if self.cycles is not None and self.cycles < 0:
            raise ValueError("cycles must be >= 0")
        if self.interval <= self.per_camera_timeout:
            log.warning("interval %.1fs <= per-camera timeout %.1fs; slow cameras will skip cycles",
                        self.interval, self.per_camera_timeout)

    @property
    def manifest_path(self) -> Path:
        return self.output_root / MANIFEST_NAME


@dataclass(frozen=True)
class ArchiveJob:
    camera: CameraRecord
    cycle_index: int
    scheduled_for: datetime


@dataclass(frozen=True)
class ManifestEntry:
    camera_id: str
    cycle_index: int
    scheduled_for: datetime
    captured_at: datetime
    status: str  # "Ok" or "Error"
    error_kind: str | None = None
    relative_path: str | None = None
    bytes_written: int = 0
    content_digest: str | None = None

    def __post_init__(self):
        if self.status not in ("Ok", "Error"):
            raise ValueError(f"bad status {self.status!r}")
        ok = self.relative_path is not None and self.bytes_written > 0
        if (self.status == "Ok") != ok:
            raise ValueError("status Ok requires a stored file with bytes_written > 0")

    @property
    def ok(self) -> bool:
        return self.status == "Ok"

    def to_dict(self) -> dict[str, Any]:
        return {
            "camera_id": self.camera_id,
            "cycle_index": self.cycle_index,
            "scheduled_for": to_rfc3339(self.scheduled_for),
            "captured_at": to_rfc3339(self.captured_at),
            "status": self.status,
            "error_kind": self.error_kind,
            "relative_path": self.relative_path,
            "bytes_written": self.bytes_written,
            "content_digest": self.content_digest,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ManifestEntry:
        return cls(
            camera_id=d["camera_id"],
            cycle_index=int(d["cycle_index"]),
            scheduled_for=parse_rfc3339(d["scheduled_for"]),
            captured_at=parse_rfc3339(d["captured_at"]),
            status=d["status"],
            error_kind=d.get("error_kind"),
            relative_path=d.get("relative_path"),
            bytes_written=int(d.get("bytes_written", 0)),
            content_digest=d.get("content_digest"),
        )


def read_manifest(path: str | os.PathLike) -> list[ManifestEntry]:
    entries = []
    for d in jsonl.read(path):
        try:
            entries.append(ManifestEntry.from_dict(d))
        except (KeyError, ValueError, TypeError) as exc:
            log.warning("skipping malformed manifest record in %s: %s", path, exc)
    return entries


class Manifest:
    """Append-only writer; appends are serialized through one lock."""

    def __init__(self, path: str | os.PathLike):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, entry: ManifestEntry) -> None:
        with self._lock:
            jsonl.append(self.path, [entry.to_dict()])

    def entries(self) -> list[ManifestEntry]:
        return read_manifest(self.path)


def storage_path(
    camera_id: str,
    captured_at: datetime,
    extension: str,
    exists: Callable[[str], bool] | None = None,
) -> str:
    """``<camera_id>/<YYYY>/<MM>/<DD>/<HHMMSS>.<ext>`` in UTC.

    When ``exists`` reports the name taken, ``_1``, ``_2``... are appended to
    the time stamp.
    """
    ts = captured_at.astimezone(timezone.utc)
    stem = f"{camera_id}/{ts:%Y/%m/%d/%H%M%S}"
    candidate = f"{stem}.{extension}"
    n = 0
    while exists is not None and exists(candidate):
        n += 1
        candidate = f"{stem}_{n}.{extension}"
    return candidate


def plan_cycle(
    registry: Registry,
    config: ArchiveConfig,
    cycle_index: int,
    scheduled_for: datetime | None = None,
) -> list[ArchiveJob]:
    """One job per enabled camera of a capturable kind, all sharing one start time."""
    when = scheduled_for or utcnow()
    return [
        ArchiveJob(camera, cycle_index, when)
        for camera in registry.list_cameras(CAPTURABLE_KINDS, enabled_only=True)
    ]


def _extension_for(body: bytes) -> str:
    if body.startswith(b"\xff\xd8"):
        return "jpg"
    if body.startswith(b"\x89PNG"):
        return "png"
    if body.startswith((b"GIF87a", b"GIF89a")):
        return "gif"
    return "bin"


def _grab(camera: CameraRecord, fetcher: HttpFetcher, timeout: float) -> tuple[bytes, str]:
    kind = camera.media_kind
    if kind is MediaKind.STILL_IMAGE:
        body = fetcher.get(camera.endpoint, timeout=timeout).body
        if not body:
            raise FetchError("empty", f"{camera.endpoint}: empty body")
        return body, _extension_for(body)
    if kind is MediaKind.MJPEG_STREAM:
        return sample_mjpeg_frame(camera.endpoint, fetcher, timeout), "jpg"
    if kind is MediaKind.HLS_STREAM:
        try:
            segment = latest_segment_url(camera.endpoint, fetcher, timeout)
        except HlsParseError as exc:
            raise FetchError("playlist", str(exc)) from exc
        body = fetcher.get(segment, timeout=timeout).body
        if not body:
            raise FetchError("empty", f"{segment}: empty body")
        return body, "ts"
    raise FetchError("unsupported", f"{kind.value} is not capturable")


def _write_atomic(root: Path, relative: str, body: bytes) -> None:
    final = root / relative
    final.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=final.parent, prefix=final.name + ".", suffix=TEMP_SUFFIX)
    try:
        with os.fdopen(fd, "wb") as out:
            out.write(body)
        os.replace(tmp, final)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def capture(
    job: ArchiveJob,
    config: ArchiveConfig,
    fetcher: HttpFetcher,
    manifest: Manifest | None = None,
) -> ManifestEntry:
    """Capture one snapshot; never raises for camera-side failures."""
    attempts = config.retries + 1
    error_kind = "unknown"
    for attempt in range(attempts):
        if attempt:
            time.sleep(RETRY_BACKOFF * attempt)
        try:
            body, ext = _grab(job.camera, fetcher, config.per_camera_timeout)
        except FetchError as exc:
            error_kind = exc.kind
            log.debug("capture %s attempt %d failed: %s", job.camera.camera_id, attempt + 1, exc)
            continue
        captured_at = utcnow()
        root = config.output_root
        rel = storage_path(job.camera.camera_id, captured_at, ext, lambda p: (root / p).exists())
        _write_atomic(root, rel, body)
        entry = ManifestEntry(
            camera_id=job.camera.camera_id,
            cycle_index=job.cycle_index,
            scheduled_for=job.scheduled_for,
            captured_at=captured_at,
            status="Ok",
            relative_path=rel,
            bytes_written=len(body),
            content_digest=hashlib.sha256(body).hexdigest(),
        )
        break
    else:
        entry = ManifestEntry(
            camera_id=job.camera.camera_id,
            cycle_index=job.cycle_index,
            scheduled_for=job.scheduled_for,
            captured_at=utcnow(),
            status="Error",
            error_kind=error_kind,
        )
    if manifest is not None:
        manifest.append(entry)
    return entry


def _image_files(root: Path) -> Iterable[Path]:
    for child in root.iterdir() if root.exists() else ():
        if child.is_dir():
            yield from (p for p in child.rglob("*") if p.is_file())


@dataclass
class Mismatch:
    kind: str  # missing_file, digest_mismatch, size_mismatch, orphan_file, temp_file
    path: str
    camera_id: str | None = None


def reconcile(output_root: str | os.PathLike) -> list[Mismatch]:
    """Compare the manifest with the files on disk; empty list means consistent."""
    root = Path(output_root)
    problems: list[Mismatch] = []
    indexed: set[str] = set()
    for e in read_manifest(root / MANIFEST_NAME):
        if not e.ok:
            continue
        indexed.add(e.relative_path)
        path = root / e.relative_path
        if not path.is_file():
            problems.append(Mismatch("missing_file", e.relative_path, e.camera_id))
            continue
        data = path.read_bytes()
        if len(data) != e.bytes_written:
            problems.append(Mismatch("size_mismatch", e.relative_path, e.camera_id))
        elif hashlib.sha256(data).hexdigest() != e.content_digest:
            problems.append(Mismatch("digest_mismatch", e.relative_path, e.camera_id))
    for p in _image_files(root):
        rel = p.relative_to(root).as_posix()
        if p.name.endswith(TEMP_SUFFIX):
            problems.append(Mismatch("temp_file", rel))
        elif rel not in indexed:
            problems.append(Mismatch("orphan_file", rel))
    return problems


def recover(output_root: str | os.PathLike) -> int:
    """Delete temp files and images no manifest line references; returns the count."""
    root = Path(output_root)
    removed = 0
    for m in reconcile(root):
        if m.kind in ("temp_file", "orphan_file"):
            (root / m.path).unlink(missing_ok=True)
            removed += 1
    if removed:
        log.info("recovered %s: removed %d unindexed files", root, removed)
    return removed


@dataclass
class CycleStats:
    cycle_index: int
    scheduled_for: datetime
    jobs: int = 0
    ok: int = 0
    errors: int = 0
    skipped: int = 0
    wall_time: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "cycle_index": self.cycle_index,
            "scheduled_for": to_rfc3339(self.scheduled_for),
            "jobs": self.jobs,
            "ok": self.ok,
            "errors": self.errors,
            "skipped": self.skipped,
            "wall_time": self.wall_time,
        }


@dataclass
class ArchiveReport:
    cycles: list[CycleStats] = field(default_factory=list)
    recovered_files: int = 0

    @property
    def cycles_run(self) -> int:
        return len(self.cycles)

    @property
    def ok(self) -> int:
        return sum(c.ok for c in self.cycles)

    @property
    def errors(self) -> int:
        return sum(c.errors for c in self.cycles)

    @property
    def skipped(self) -> int:
        return sum(c.skipped for c in self.cycles)

    def to_dict(self) -> dict[str, Any]:
        return {
            "cycles_run": self.cycles_run,
            "ok": self.ok,
            "errors": self.errors,
            "skipped": self.skipped,
            "recovered_files": self.recovered_files,
            "cycles": [c.to_dict() for c in self.cycles],
        }


def _check_writable(root: Path) -> None:
    try:
        root.mkdir(parents=True, exist_ok=True)
        fd, probe = tempfile.mkstemp(dir=root, prefix=".probe.")
        os.close(fd)
        os.unlink(probe)
    except OSError as exc:
        raise ArchiveError(f"output root {root} is not writable: {exc}") from exc


def run(
    registry: Registry,
    config: ArchiveConfig,
    fetcher: HttpFetcher | None = None,
    stop: threading.Event | None = None,
    reload_registry: bool = True,
) -> ArchiveReport:
    """Run capture cycles; cycle k starts at ``t0 + k * interval``.

    At most ``config.workers`` captures run at once. A camera whose previous
    capture is still in flight at a cycle boundary gets an Error entry with
    ``error_kind="skipped"`` for that cycle instead of a second capture.
    """
    report = ArchiveReport()
    if config.cycles == 0:
        return report
    root = config.output_root
    _check_writable(root)
    report.recovered_files = recover(root)
    fetcher = fetcher or HttpFetcher(timeout=config.per_camera_timeout)
    stop = stop or threading.Event()
    manifest = Manifest(config.manifest_path)
    previous = manifest.entries()
    first_cycle = max((e.cycle_index for e in previous), default=-1) + 1

    busy: dict[str, Future] = {}
    pending: dict[Future, tuple[ArchiveJob, CycleStats]] = {}
    open_cycles: dict[int, tuple[CycleStats, float, int]] = {}

    def record(entry: ManifestEntry, stats: CycleStats) -> None:
        manifest.append(entry)
        if entry.ok:
            stats.ok += 1
        elif entry.error_kind == "skipped":
            stats.skipped += 1
        else:
            stats.errors += 1

    def finish_cycles() -> None:
        for idx in list(open_cycles):
            stats, started, _ = open_cycles[idx]
            if stats.ok + stats.errors + stats.skipped == stats.jobs:
                stats.wall_time = time.monotonic() - started
                del open_cycles[idx]

    def drain(until: float | None) -> None:
        """Collect finished captures until the monotonic deadline (None: all)."""
        while pending:
            timeout = None if until is None else max(0.0, until - time.monotonic())
            done, _ = wait(list(pending), timeout=timeout, return_when=FIRST_COMPLETED)
            for fut in done:
                job, stats = pending.pop(fut)
                busy.pop(job.camera.camera_id, None)
                try:
                    entry = fut.result()
                except Exception as exc:  # noqa: BLE001 - one camera never aborts a cycle
                    log.exception("capture crashed for %s", job.camera.camera_id)
                    entry = ManifestEntry(job.camera.camera_id, job.cycle_index, job.scheduled_for,
                                          utcnow(), "Error", error_kind=f"internal:{type(exc).__name__}")
                record(entry, stats)
            finish_cycles()
            if until is not None and time.monotonic() >= until:
                return
            if stop.is_set() and until is not None:
                return
        if until is not None:
            remaining = until - time.monotonic()
            if remaining > 0:
                stop.wait(remaining)

    t0 = time.monotonic()
    wall0 = time.time()
    with ThreadPoolExecutor(max_workers=config.workers, thread_name_prefix="capture") as pool:
        k = 0
        while config.cycles is None or k < config.cycles:
            boundary = t0 + k * config.interval
            drain(boundary)
            if stop.is_set():
                break
            if reload_registry and k:
                registry.reload()
            cycle_index = first_cycle + k
            scheduled = datetime.fromtimestamp(wall0 + k * config.interval, timezone.utc)
            jobs = plan_cycle(registry, config, cycle_index, scheduled)
            stats = CycleStats(cycle_index, scheduled, jobs=len(jobs))
            report.cycles.append(stats)
            open_cycles[cycle_index] = (stats, time.monotonic(), len(jobs))
            for job in jobs:
                cid = job.camera.camera_id
                if cid in busy:
                    record(ManifestEntry(cid, cycle_index, scheduled, utcnow(), "Error",
                                         error_kind="skipped"), stats)
                    continue
                fut = pool.submit(capture, job, config, fetcher)
                busy[cid] = fut
                pending[fut] = (job, stats)
            finish_cycles()
            log.info("cycle %d scheduled: %d jobs", cycle_index, len(jobs))
            k += 1
        drain(None)
    return report

import hashlib
import threading
import time
from collections import Counter, defaultdict
from datetime import datetime, timezone

import pytest

from camscout import archiver
from camscout.archiver import (
    ArchiveConfig,
    ArchiveError,
    ArchiveJob,
    Manifest,
    ManifestEntry,
    capture,
    plan_cycle,
    read_manifest,
    reconcile,
    recover,
    run,
    storage_path,
)
from camscout.models import MediaKind
from camscout.registry import CameraRecord, Registry
from helpers import registry_from_fleet

WHEN = datetime(2024, 3, 1, 12, 34, 56, tzinfo=timezone.utc)


def job_for(url, kind=MediaKind.STILL_IMAGE, cycle=0):
    return ArchiveJob(CameraRecord.new(url, kind, "http://src/", enabled=True), cycle, WHEN)


class TestStoragePath:
    def test_layout(self):
        assert storage_path("abc", WHEN, "jpg") == "abc/2024/03/01/123456.jpg"

    def test_converts_to_utc(self):
        from datetime import timedelta
        local = WHEN.astimezone(timezone(timedelta(hours=-5)))
        assert storage_path("abc", local, "jpg") == "abc/2024/03/01/123456.jpg"

    def test_collision_suffix(self):
        taken = {"abc/2024/03/01/123456.jpg", "abc/2024/03/01/123456_1.jpg"}
        assert storage_path("abc", WHEN, "jpg", taken.__contains__) == "abc/2024/03/01/123456_2.jpg"


class TestManifestEntry:
    def test_ok_requires_file(self):
        with pytest.raises(ValueError):
            ManifestEntry("c", 0, WHEN, WHEN, "Ok")
        with pytest.raises(ValueError):
            ManifestEntry("c", 0, WHEN, WHEN, "Error", relative_path="x", bytes_written=4)
        with pytest.raises(ValueError):
            ManifestEntry("c", 0, WHEN, WHEN, "Maybe")

    def test_roundtrip(self, tmp_path):
        e = ManifestEntry("c", 3, WHEN, WHEN, "Ok", relative_path="c/x.jpg", bytes_written=4, content_digest="d")
        m = Manifest(tmp_path / "m.jsonl")
        m.append(e)
        assert m.entries() == [e]


class TestConfig:
    @pytest.mark.parametrize("kw", [{"workers": 0}, {"interval": 0}, {"per_camera_timeout": 0},
                                    {"retries": -1}, {"cycles": -1}])
    def test_rejects(self, tmp_path, kw):
        with pytest.raises(ValueError):
            ArchiveConfig(tmp_path, **kw)


def test_plan_cycle_selects_enabled_capturable(tmp_path):
    reg = Registry(tmp_path / "r.jsonl")
    on = reg.upsert_camera(CameraRecord.new("http://h/a.jpg", MediaKind.STILL_IMAGE, "http://h/", enabled=True))
    reg.upsert_camera(CameraRecord.new("http://h/b.jpg", MediaKind.STILL_IMAGE, "http://h/"))
    reg.upsert_camera(CameraRecord.new("rtsp://h/c", MediaKind.RTSP_LINK, "http://h/"))
    jobs = plan_cycle(reg, ArchiveConfig(tmp_path / "out"), 4, WHEN)
    assert [(j.camera.camera_id, j.cycle_index, j.scheduled_for) for j in jobs] == [(on, 4, WHEN)]


class TestCapture:
    def test_still(self, fleet_factory, fetcher, tmp_path):
        fleet = fleet_factory(rotating_images=1)
        cfg = ArchiveConfig(tmp_path)
        e = capture(job_for(fleet.url("/cam/rotating/0.jpg")), cfg, fetcher)
        assert e.ok and e.relative_path.endswith(".jpg")
        data = (tmp_path / e.relative_path).read_bytes()
        assert len(data) == e.bytes_written and hashlib.sha256(data).hexdigest() == e.content_digest
        assert e.content_digest in fleet.served_digests("/cam/rotating/0.jpg")

    def test_mjpeg(self, fleet_factory, fetcher, tmp_path):
        fleet = fleet_factory(mjpeg_streams=1, frame_period=0.1)
        e = capture(job_for(fleet.url("/mjpg/0/video.mjpg"), MediaKind.MJPEG_STREAM), ArchiveConfig(tmp_path), fetcher)
        assert e.ok and e.relative_path.endswith(".jpg")
        assert e.content_digest in fleet.emitted_frames("/mjpg/0/video.mjpg")

    def test_hls(self, fleet_factory, fetcher, tmp_path):
        fleet = fleet_factory(hls_streams=1)
        e = capture(job_for(fleet.url("/hls/0/master.m3u8"), MediaKind.HLS_STREAM), ArchiveConfig(tmp_path), fetcher)
        assert e.ok and e.relative_path.endswith(".ts")
        assert e.content_digest in fleet.served_digests("/hls/0/master.m3u8")

    def test_connect_error(self, fetcher, tmp_path):
        e = capture(job_for("http://127.0.0.1:9/x.jpg"), ArchiveConfig(tmp_path, retries=0), fetcher)
        assert e.status == "Error" and e.error_kind == "connect" and e.relative_path is None

    def test_http_error_retried(self, fleet_factory, fetcher, tmp_path, monkeypatch):
        monkeypatch.setattr(archiver, "RETRY_BACKOFF", 0.01)
        fleet = fleet_factory(static_images=1, error_rate=1.0)
        e = capture(job_for(fleet.url("/cam/static/0.jpg")), ArchiveConfig(tmp_path, retries=2), fetcher)
        assert e.error_kind == "http"
        assert len(fleet.request_log()) == 3

    def test_timeout(self, fleet_factory, fetcher, tmp_path):
        fleet = fleet_factory(static_images=1, delay_ms=1500)
        cfg = ArchiveConfig(tmp_path, per_camera_timeout=0.3, retries=0)
        e = capture(job_for(fleet.url("/cam/static/0.jpg")), cfg, fetcher)
        assert e.error_kind == "timeout"

    def test_collision_keeps_both(self, fleet_factory, fetcher, tmp_path):
        fleet = fleet_factory(static_images=1)
        cfg = ArchiveConfig(tmp_path)
        paths = {capture(job_for(fleet.url("/cam/static/0.jpg")), cfg, fetcher).relative_path for _ in range(3)}
        assert len(paths) == 3


def test_zero_cycles_does_nothing(tmp_path):
    report = run(Registry(tmp_path / "r.jsonl"), ArchiveConfig(tmp_path / "out", cycles=0))
    assert report.cycles_run == 0 and not (tmp_path / "out").exists()


def test_unwritable_root(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ArchiveError):
        run(Registry(tmp_path / "r.jsonl"), ArchiveConfig(blocker / "out", cycles=1))


@pytest.mark.slow
def test_hundred_cameras_three_cycles(fleet_factory, tmp_path):
    fleet = fleet_factory(static_images=50, rotating_images=50, rotation_period=0.5)
    reg = registry_from_fleet(fleet, tmp_path / "r.jsonl")
    cfg = ArchiveConfig(tmp_path / "out", interval=2.0, workers=16, per_camera_timeout=1.5, cycles=3)
    report = run(reg, cfg)
    entries = read_manifest(cfg.manifest_path)
    assert len(entries) == 300 and report.ok == 300
    per_cycle = Counter((e.camera_id, e.cycle_index) for e in entries)
    assert set(per_cycle.values()) == {1} and len(per_cycle) == 300
    sched = sorted({e.scheduled_for for e in entries})
    assert [round((b - a).total_seconds(), 3) for a, b in zip(sched, sched[1:])] == [2.0, 2.0]
    assert reconcile(cfg.output_root) == []


def test_worker_bound_and_no_overlap(fleet_factory, tmp_path):
    fleet = fleet_factory(static_images=20, delay_ms=150)
    reg = registry_from_fleet(fleet, tmp_path / "r.jsonl")
    cfg = ArchiveConfig(tmp_path / "out", interval=1.0, workers=4, per_camera_timeout=0.9, cycles=2)
    run(reg, cfg)
    assert 1 < fleet.max_concurrency() <= 4
    assert all(fleet.max_concurrency(e.path) == 1 for e in fleet.cameras())


def test_straggler_is_skipped_not_doubled(fleet_factory, tmp_path):
    fleet = fleet_factory(static_images=3, endpoint_delays_ms={"/cam/static/0.jpg": 1300})
    reg = registry_from_fleet(fleet, tmp_path / "r.jsonl")
    cfg = ArchiveConfig(tmp_path / "out", interval=0.5, workers=4, per_camera_timeout=3, retries=0, cycles=3)
    report = run(reg, cfg)
    slow_id = next(c.camera_id for c in reg.list_cameras() if c.endpoint.endswith("/0.jpg"))
    by_cam = defaultdict(list)
    for e in read_manifest(cfg.manifest_path):
        by_cam[e.camera_id].append(e)
    slow = sorted(by_cam[slow_id], key=lambda e: e.cycle_index)
    assert [e.cycle_index for e in slow] == [0, 1, 2]
    assert slow[0].ok and [e.error_kind for e in slow[1:]] == ["skipped", "skipped"]
    assert all(len(v) == 3 and all(e.ok for e in v) for k, v in by_cam.items() if k != slow_id)
    assert report.skipped == 2
    assert fleet.max_concurrency("/cam/static/0.jpg") == 1


def test_stop_event(fleet_factory, tmp_path):
    fleet = fleet_factory(static_images=2)
    reg = registry_from_fleet(fleet, tmp_path / "r.jsonl")
    stop = threading.Event()
    threading.Timer(0.3, stop.set).start()
    t = time.monotonic()
    report = run(reg, ArchiveConfig(tmp_path / "out", interval=60, cycles=None), stop=stop)
    assert time.monotonic() - t < 5 and report.cycles_run == 1


def test_restart_continues_and_preserves(fleet_factory, tmp_path):
    fleet = fleet_factory(static_images=3)
    reg = registry_from_fleet(fleet, tmp_path / "r.jsonl")
    cfg = ArchiveConfig(tmp_path / "out", interval=0.2, cycles=2)
    run(reg, cfg)
    before = cfg.manifest_path.read_bytes()
    run(reg, cfg)
    after = cfg.manifest_path.read_bytes()
    assert after.startswith(before)
    assert sorted({e.cycle_index for e in read_manifest(cfg.manifest_path)}) == [0, 1, 2, 3]
    assert reconcile(cfg.output_root) == []


def test_registry_changes_picked_up_between_cycles(fleet_factory, tmp_path):
    fleet = fleet_factory(static_images=2)
    path = tmp_path / "r.jsonl"
    reg = registry_from_fleet(fleet, path)
    first = reg.list_cameras()[0].camera_id
    cfg = ArchiveConfig(tmp_path / "out", interval=0.6, cycles=2)
    threading.Timer(0.3, lambda: Registry(path).disable(first)).start()
    run(reg, cfg)
    cycles = Counter(e.cycle_index for e in read_manifest(cfg.manifest_path))
    assert cycles == {0: 2, 1: 1}


class TestReconcile:
    def setup_archive(self, fleet_factory, tmp_path):
        fleet = fleet_factory(static_images=3)
        reg = registry_from_fleet(fleet, tmp_path / "r.jsonl")
        cfg = ArchiveConfig(tmp_path / "out", interval=0.2, cycles=1)
        run(reg, cfg)
        return cfg.output_root, read_manifest(cfg.manifest_path)

    def test_detects_each_kind(self, fleet_factory, tmp_path):
        root, entries = self.setup_archive(fleet_factory, tmp_path)
        (root / entries[0].relative_path).unlink()
        (root / entries[1].relative_path).write_bytes(b"short")
        p = root / entries[2].relative_path
        data = bytearray(p.read_bytes())
        data[-3] ^= 0xFF
        p.write_bytes(bytes(data))
        cam_dir = root / entries[0].camera_id
        (cam_dir / "orphan.jpg").write_bytes(b"x")
        (cam_dir / "half.jpg.abc.part").write_bytes(b"x")
        kinds = Counter(m.kind for m in reconcile(root))
        assert kinds == {"missing_file": 1, "size_mismatch": 1, "digest_mismatch": 1,
                         "orphan_file": 1, "temp_file": 1}

    def test_recover_removes_unindexed_only(self, fleet_factory, tmp_path):
        root, entries = self.setup_archive(fleet_factory, tmp_path)
        cam_dir = root / entries[0].camera_id
        (cam_dir / "orphan.jpg").write_bytes(b"x")
        (cam_dir / "half.jpg.abc.part").write_bytes(b"x")
        assert recover(root) == 2
        assert reconcile(root) == []
        assert all((root / e.relative_path).exists() for e in entries)

    def test_torn_manifest_line_tolerated(self, fleet_factory, tmp_path):
        root, entries = self.setup_archive(fleet_factory, tmp_path)
        with open(root / "manifest.jsonl", "ab") as f:
            f.write(b'{"camera_id": "trunc')
        assert read_manifest(root / "manifest.jsonl") == entries
        assert reconcile(root) == []

"""``camscout`` command line: discover, identify, archive, fleet, stats.

Stages talk only through files: ``discover`` writes candidates into the
registry, ``identify`` writes verdicts back into it, and ``archive`` reads
enabled cameras from it and writes images plus a manifest.

Option values resolve as: command-line flag, then ``--config`` file, then the
built-in default. The config file holds ``key = value`` lines whose keys are
flag names with or without the leading dashes (``delay-ms = 250``); ``#``
starts a comment. Do not point two writers at one registry at the same time.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import signal
import sys
import threading
import time
from pathlib import Path
from typing import Any, Sequence

from . import __version__, jsonl
from .archiver import ArchiveConfig, ArchiveError
from .archiver import run as run_archive
from .crawler import CrawlConfig, Crawler
from .fetch import DEFAULT_TIMEOUT, DEFAULT_USER_AGENT, HttpFetcher
from .liveness import LivenessPolicy, PairRule, identify_all
from .mockfleet import FleetSpec, start_fleet
from .models import CandidateLink, Label
from .registry import CameraRecord, Registry
from .stats import summarize

log = logging.getLogger("camscout")

DEFAULT_REGISTRY = "camscout-registry.jsonl"


class StageError(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


class ConfigFileError(Exception):
    pass


class _KeyValueFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        msg = record.getMessage().replace('"', "'")
        line = (
            f"ts={self.formatTime(record, '%Y-%m-%dT%H:%M:%S')} level={record.levelname.lower()} "
            f'logger={record.name} msg="{msg}"'
        )
        if record.exc_info:
            line += "\n" + self.formatException(record.exc_info)
        return line


def _setup_logging(verbosity: str) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_KeyValueFormatter())
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(getattr(logging, verbosity.upper()))


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--registry", default=DEFAULT_REGISTRY,
                   help=f"registry log path (default: {DEFAULT_REGISTRY})")
    g.add_argument("--config", default=None, help="key = value file supplying flag defaults")
    g.add_argument("--log-level", default="info", choices=["debug", "info", "warning", "error"],
                   help="stderr log verbosity (default: info)")
    g.add_argument("--user-agent", default=DEFAULT_USER_AGENT, help="HTTP User-Agent")
    g.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT,
                   help=f"per-request timeout in seconds (default: {DEFAULT_TIMEOUT})")

    parser = argparse.ArgumentParser(prog="camscout", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"camscout {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    subs: dict[str, argparse.ArgumentParser] = {}

    p = sub.add_parser("discover", parents=[common], help="crawl seed pages for candidate camera links")
    p.add_argument("--seeds", help="file with one seed URL per line (# comments allowed)")
    p.add_argument("--depth", type=int, default=1, help="maximum link depth from a seed (default: 1)")
    p.add_argument("--max-pages", type=int, default=100, help="page fetch budget (default: 100)")
    p.add_argument("--delay-ms", type=float, default=500.0,
                   help="minimum gap between requests to one host (default: 500)")
    p.add_argument("--same-host", action="store_true", default=False,
                   help="only follow links on the seeds' hosts")
    p.add_argument("--fan-out", type=int, default=8, help="hosts fetched concurrently (default: 8)")
    p.add_argument("--out", help="registry to write (overrides --registry)")
    p.add_argument("--report", help="crawl report path (default: <registry>.crawl.jsonl)")
    subs["discover"] = p

    p = sub.add_parser("identify", parents=[common], help="classify registry candidates as live or static")
    p.add_argument("--samples", type=int, default=3, help="samples per candidate (default: 3)")
    p.add_argument("--interval-secs", type=float, default=20.0,
                   help="seconds between samples (default: 20)")
    p.add_argument("--percent-threshold", type=float, default=0.01,
                   help="changed-pixel fraction that counts as change (default: 0.01)")
    p.add_argument("--luma-threshold", type=float, default=1.0,
                   help="mean luminance delta that counts as change (default: 1.0)")
    p.add_argument("--channel-tol", type=int, default=10,
                   help="per-channel delta a pixel may move and still be unchanged (default: 10)")
    p.add_argument("--pair-rule", default=PairRule.MAJORITY.value, choices=[r.value for r in PairRule],
                   help="how the three comparators combine per pair (default: Majority)")
    p.add_argument("--set-rule", type=float, default=1.0,
                   help="fraction of sample pairs that must change for Live (default: 1.0)")
    p.add_argument("--workers", type=int, default=64, help="candidates sampled concurrently (default: 64)")
    p.add_argument("--all", action="store_true", default=False,
                   help="re-identify every record, not just unverified ones")
    subs["identify"] = p

    p = sub.add_parser("archive", parents=[common], help="capture snapshots from enabled cameras")
    p.add_argument("--out", default="archive", help="archive directory (default: ./archive)")
    p.add_argument("--interval-secs", type=float, default=600.0, help="seconds between cycles (default: 600)")
    p.add_argument("--workers", type=int, default=16, help="concurrent captures (default: 16)")
    p.add_argument("--cycles", type=int, default=None, help="number of cycles (default: run until stopped)")
    p.add_argument("--timeout-secs", type=float, default=10.0, help="per-camera timeout (default: 10)")
    p.add_argument("--retries", type=int, default=1, help="retries per capture (default: 1)")
    subs["archive"] = p

    p = sub.add_parser("fleet", parents=[common], help="serve a mock camera fleet for testing")
    p.add_argument("--static", type=int, default=5, help="static image endpoints (default: 5)")
    p.add_argument("--rotating", type=int, default=5, help="rotating image endpoints (default: 5)")
    p.add_argument("--mjpeg", type=int, default=2, help="MJPEG stream endpoints (default: 2)")
    p.add_argument("--hls", type=int, default=2, help="HLS stream endpoints (default: 2)")
    p.add_argument("--decoys", type=int, default=3, help="decoy HTML pages (default: 3)")
    p.add_argument("--rtsp", type=int, default=0, help="rtsp:// links embedded in the index (default: 0)")
    p.add_argument("--host", default="127.0.0.1", help="listen address (default: 127.0.0.1)")
    p.add_argument("--port", type=int, default=8000, help="listen port, 0 for any (default: 8000)")
    p.add_argument("--seed", type=int, default=0, help="image generation seed (default: 0)")
    p.add_argument("--rotation-secs", type=float, default=5.0, help="rotating image period (default: 5)")
    p.add_argument("--frame-secs", type=float, default=1.0, help="MJPEG frame period (default: 1)")
    p.add_argument("--segment-secs", type=float, default=4.0, help="HLS segment period (default: 4)")
    p.add_argument("--delay-ms", type=float, default=0.0, help="injected per-request delay (default: 0)")
    p.add_argument("--error-rate", type=float, default=0.0, help="fraction of requests failed (default: 0)")
    p.add_argument("--duration", type=float, default=None, help="seconds to serve (default: until Ctrl-C)")
    subs["fleet"] = p

    p = sub.add_parser("stats", parents=[common], help="summarize registry and archive manifest")
    p.add_argument("--out", default=None, help="archive directory whose manifest.jsonl to read")
    p.add_argument("--manifest", default=None, help="manifest path (overrides --out)")
    p.add_argument("--json", action="store_true", default=False, help="emit JSON instead of text")
    subs["stats"] = p

    return parser, subs


def read_config_file(path: str) -> list[tuple[int, str, str]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigFileError(f"config {path}: cannot read: {exc}") from None
    entries = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigFileError(f"config {path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        entries.append((lineno, key.strip().lstrip("-").replace("-", "_"), value.strip()))
    return entries


def _apply_config(path: str, command: str, subs: dict[str, argparse.ArgumentParser]) -> None:
    known = {a.dest for p in subs.values() for a in p._actions}
    actions = {a.dest: a for a in subs[command]._actions}
    defaults: dict[str, Any] = {}
    for lineno, key, value in read_config_file(path):
        if key not in known or key in ("help", "config"):
            raise ConfigFileError(f"config {path}:{lineno}: unknown key {key!r}")
        action = actions.get(key)
        if action is None:
            continue  # belongs to another subcommand
        try:
            if isinstance(action, argparse._StoreTrueAction):
                converted: Any = _bool(value)
            elif action.type is not None:
                converted = action.type(value)
            else:
                converted = value
        except (TypeError, ValueError) as exc:
            raise ConfigFileError(f"config {path}:{lineno}: bad value for {key!r}: {exc}") from None
        if action.choices is not None and converted not in action.choices:
            raise ConfigFileError(f"config {path}:{lineno}: {key!r} must be one of {list(action.choices)}")
        defaults[key] = converted
    subs[command].set_defaults(**defaults)


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    """Parse ``argv`` with config-file defaults layered under explicit flags."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        _apply_config(args.config, args.command, subs)
        args = parser.parse_args(argv)
    return args


# -- subcommands -------------------------------------------------------------


def read_seeds(path: str) -> list[str]:
    seeds = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            seeds.append(line)
    return seeds


def cmd_discover(args: argparse.Namespace) -> int:
    if not args.seeds:
        raise StageError("discover", "--seeds is required")
    try:
        seeds = read_seeds(args.seeds)
    except OSError as exc:
        raise StageError("discover", f"cannot read seeds file: {exc}") from None
    if not seeds:
        raise StageError("discover", f"no seeds in {args.seeds}")
    registry_path = Path(args.out or args.registry)
    try:
        config = CrawlConfig(
            seeds=tuple(seeds),
            max_depth=args.depth,
            max_pages=args.max_pages,
            same_host_only=args.same_host,
            per_host_min_delay_ms=args.delay_ms,
            request_timeout=args.timeout,
            user_agent=args.user_agent,
            fan_out=args.fan_out,
        )
    except ValueError as exc:
        raise StageError("discover", f"invalid crawl configuration: {exc}") from None

    crawler = Crawler(config)
    candidates = crawler.run()
    report_path = Path(args.report) if args.report else registry_path.with_name(registry_path.name + ".crawl.jsonl")
    report_path.parent.mkdir(parents=True, exist_ok=True)
    jsonl.rewrite(report_path, (e.to_dict() for e in crawler.report))

    registry = Registry(registry_path)
    fresh = []
    for c in candidates:
        record = CameraRecord.new(c.url, c.media_kind, c.source_page)
        if record.camera_id not in registry:
            fresh.append(record)
    registry.upsert_many(fresh)
    log.info("discover: %d pages fetched, %d candidates, %d new records in %s",
             len(crawler.fetched), len(candidates), len(fresh), registry_path)
    return 0


def cmd_identify(args: argparse.Namespace) -> int:
    registry = Registry(args.registry)
    if len(registry) == 0:
        log.warning("identify: registry %s is empty; run discover first", args.registry)
        return 0
    try:
        policy = LivenessPolicy(
            n_samples=args.samples,
            sample_interval=args.interval_secs,
            channel_tolerance=args.channel_tol,
            percent_threshold=args.percent_threshold,
            luminance_threshold=args.luma_threshold,
            pair_rule=PairRule(args.pair_rule),
            set_rule=args.set_rule,
        )
    except ValueError as exc:
        raise StageError("identify", f"invalid policy: {exc}") from None
    records = [r for r in registry.list_cameras() if args.all or r.verdict is None]
    if not records:
        log.info("identify: nothing to do, every record already has a verdict")
        return 0
    fetcher = HttpFetcher(args.user_agent, args.timeout)
    candidates = [CandidateLink(r.endpoint, r.media_kind, r.source_page) for r in records]
    verdicts = identify_all(candidates, policy, fetcher, workers=args.workers, timeout=args.timeout)
    updated = []
    for r in records:
        v = verdicts[r.endpoint]
        updated.append(dataclasses.replace(
            r, verdict=v, enabled=v.label is Label.LIVE and r.media_kind.capturable))
    registry.upsert_many(updated)
    counts = {label.value: sum(1 for u in updated if u.verdict.label is label) for label in Label}
    log.info("identify: %d records classified %s", len(updated), counts)
    return 0


def cmd_archive(args: argparse.Namespace) -> int:
    registry = Registry(args.registry)
    try:
        config = ArchiveConfig(
            output_root=Path(args.out),
            interval=args.interval_secs,
            workers=args.workers,
            per_camera_timeout=args.timeout_secs,
            retries=args.retries,
            cycles=args.cycles,
        )
    except ValueError as exc:
        raise StageError("archive", f"invalid configuration: {exc}") from None
    stop = threading.Event()

    def _stop(signum, _frame):
        log.info("archive: received signal %d, finishing in-flight captures", signum)
        stop.set()

    if threading.current_thread() is threading.main_thread():
        signal.signal(signal.SIGINT, _stop)
        signal.signal(signal.SIGTERM, _stop)
    fetcher = HttpFetcher(args.user_agent, args.timeout_secs)
    try:
        report = run_archive(registry, config, fetcher, stop)
    except ArchiveError as exc:
        raise StageError("archive", str(exc)) from None
    if report.cycles_run:
        jsonl.append(config.output_root / "archive-report.jsonl", [report.to_dict()])
    log.info("archive: %d cycles, %d ok, %d errors, %d skipped",
             report.cycles_run, report.ok, report.errors, report.skipped)
    return 0


def cmd_fleet(args: argparse.Namespace) -> int:
    try:
        spec = FleetSpec(
            static_images=args.static, rotating_images=args.rotating, rotation_period=args.rotation_secs,
            mjpeg_streams=args.mjpeg, frame_period=args.frame_secs, hls_streams=args.hls,
            segment_period=args.segment_secs, decoy_pages=args.decoys, rtsp_links=args.rtsp,
            host=args.host, port=args.port, seed=args.seed, delay_ms=args.delay_ms,
            error_rate=args.error_rate,
        )
        fleet = start_fleet(spec)
    except (ValueError, OSError) as exc:
        raise StageError("fleet", str(exc)) from None
    print(fleet.index_url, flush=True)
    try:
        if args.duration is None:
            while True:
                time.sleep(3600)
        else:
            time.sleep(args.duration)
    except KeyboardInterrupt:
        pass
    finally:
        fleet.stop()
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    manifest = args.manifest or (str(Path(args.out) / "manifest.jsonl") if args.out else None)
    summary = summarize(args.registry, manifest)
    if args.json:
        print(json.dumps(summary.to_dict(), indent=2, sort_keys=True))
    else:
        print(summary.render())
    return 0


COMMANDS = {
    "discover": cmd_discover,
    "identify": cmd_identify,
    "archive": cmd_archive,
    "fleet": cmd_fleet,
    "stats": cmd_stats,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except ConfigFileError as exc:
        print(f"camscout: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    _setup_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except StageError as exc:
        print(f"camscout: {exc.stage}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

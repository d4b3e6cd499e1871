"""Temporal sampling of candidates and the live/static decision."""

from __future__ import annotations

import enum
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import Callable, Iterable

import numpy as np

from ..fetch import FetchError, HttpFetcher
from ..models import (
    CandidateLink,
    Label,
    LivenessVerdict,
    MediaKind,
    PairEvidence,
    utcnow,
)
from .comparators import (
    checksum_compare,
    decode_raster,
    luminance_diff,
    mean_luminance,
    percent_diff,
)
from .hls import check_hls_live
from .mjpeg import sample_mjpeg_frame


class PairRule(str, enum.Enum):
    ANY = "AnyComparator"
    MAJORITY = "Majority"


@dataclass(frozen=True)
class LivenessPolicy:
    n_samples: int = 3
    sample_interval: float = 20.0
    channel_tolerance: int = 10
    percent_threshold: float = 0.01
    luminance_threshold: float = 1.0
    pair_rule: PairRule = PairRule.MAJORITY
    # Fraction of adjacent pairs that must be "changed" for a Live label.
    set_rule: float = 1.0

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        if self.sample_interval <= 0:
            raise ValueError("sample_interval must be > 0")
        if not 0 <= self.channel_tolerance <= 255:
            raise ValueError("channel_tolerance must be in [0, 255]")
        if not 0 <= self.percent_threshold <= 1:
            raise ValueError("percent_threshold must be in [0, 1]")
        if not 0 <= self.luminance_threshold <= 255:
            raise ValueError("luminance_threshold must be in [0, 255]")
        if not 0 < self.set_rule <= 1:
            raise ValueError("set_rule must be in (0, 1]")
        object.__setattr__(self, "pair_rule", PairRule(self.pair_rule))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pair_rule"] = self.pair_rule.value
        return d


@dataclass(frozen=True)
class Sample:
    captured_at: datetime
    body: bytes
    raster: np.ndarray | None = field(default=None, compare=False, repr=False)


@dataclass
class SampleSet:
    candidate: CandidateLink | None
    samples: list[Sample]
    interval: float
    failures: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if self.interval <= 0:
            raise ValueError("interval must be > 0")
        stamps = [s.captured_at for s in self.samples]
        if any(b <= a for a, b in zip(stamps, stamps[1:])):
            raise ValueError("samples must be strictly increasing in captured_at")


def compare_pair(a: Sample, b: Sample, policy: LivenessPolicy) -> PairEvidence:
    same = checksum_compare(a.body, b.body)
    if a.raster is None or b.raster is None:
        # Checksum-only evidence: equal bytes settle it, differing bytes do not.
        return PairEvidence(same, None, None, False if same else None)
    if a.raster.shape != b.raster.shape:
        lum = abs(mean_luminance(a.raster) - mean_luminance(b.raster))
        return PairEvidence(same, 1.0, lum, True)
    pct = percent_diff(a.raster, b.raster, policy.channel_tolerance)
    lum = luminance_diff(a.raster, b.raster)
    votes = (not same, pct > policy.percent_threshold, lum > policy.luminance_threshold)
    if policy.pair_rule is PairRule.ANY:
        changed = any(votes)
    else:
        changed = sum(votes) >= 2
    return PairEvidence(same, pct, lum, changed)


def classify(sample_set: SampleSet, policy: LivenessPolicy) -> LivenessVerdict:
    samples = sample_set.samples
    detail = {"samples": len(samples)}
    if sample_set.failures:
        detail["failures"] = [dict(f) for f in sample_set.failures]
    if len(samples) < 2:
        return LivenessVerdict(Label.INDETERMINATE, (), policy.to_dict(), detail)

    evidence = tuple(compare_pair(a, b, policy) for a, b in zip(samples, samples[1:]))
    changed = sum(1 for e in evidence if e.changed is True)
    undecided = sum(1 for e in evidence if e.changed is None)
    if changed == 0 and undecided == 0:
        label = Label.STATIC
    elif changed > 0 and changed >= policy.set_rule * len(evidence) - 1e-12:
        label = Label.LIVE
    else:
        label = Label.INDETERMINATE
    return LivenessVerdict(label, evidence, policy.to_dict(), detail)


def _sample_loop(
    grab: Callable[[], bytes],
    policy: LivenessPolicy,
    candidate: CandidateLink | None,
    sleep: Callable[[float], None],
    clock: Callable[[], float],
) -> SampleSet:
    samples: list[Sample] = []
    failures: list[dict] = []
    start = clock()
    for k in range(policy.n_samples):
        wait = start + k * policy.sample_interval - clock()
        if wait > 0:
            sleep(wait)
        try:
            body = grab()
        except FetchError as exc:
            failures.append({"index": k, "error": exc.kind})
            continue
        samples.append(Sample(utcnow(), body, decode_raster(body)))
    return SampleSet(candidate, samples, policy.sample_interval, failures)


def sample_still(
    url: str,
    policy: LivenessPolicy,
    fetcher: HttpFetcher,
    candidate: CandidateLink | None = None,
    timeout: float | None = None,
    sleep: Callable[[float], None] = time.sleep,
    clock: Callable[[], float] = time.monotonic,
) -> SampleSet:
    """Fetch ``url`` ``policy.n_samples`` times, ``policy.sample_interval`` apart."""
    return _sample_loop(
        lambda: fetcher.get(url, timeout=timeout).body, policy, candidate, sleep, clock
    )


def sample_mjpeg(
    url: str,
    policy: LivenessPolicy,
    fetcher: HttpFetcher,
    candidate: CandidateLink | None = None,
    timeout: float | None = None,
    sleep: Callable[[float], None] = time.sleep,
    clock: Callable[[], float] = time.monotonic,
) -> SampleSet:
    """Like :func:`sample_still`, but each sample is one frame pulled from the stream."""
    return _sample_loop(
        lambda: sample_mjpeg_frame(url, fetcher, timeout), policy, candidate, sleep, clock
    )


def identify(
    candidate: CandidateLink,
    policy: LivenessPolicy,
    fetcher: HttpFetcher,
    timeout: float | None = None,
) -> LivenessVerdict:
    kind = candidate.media_kind
    if kind is MediaKind.STILL_IMAGE:
        return classify(sample_still(candidate.url, policy, fetcher, candidate, timeout), policy)
    if kind is MediaKind.MJPEG_STREAM:
        return classify(sample_mjpeg(candidate.url, policy, fetcher, candidate, timeout), policy)
    if kind is MediaKind.HLS_STREAM:
        return check_hls_live(candidate.url, policy.sample_interval, fetcher, timeout)
    return LivenessVerdict(
        Label.INDETERMINATE, (), policy.to_dict(), {"reason": f"{kind.value} is not sampled"}
    )


def identify_all(
    candidates: Iterable[CandidateLink],
    policy: LivenessPolicy,
    fetcher: HttpFetcher,
    workers: int = 64,
    timeout: float | None = None,
) -> dict[str, LivenessVerdict]:
    """Identify candidates concurrently; returns verdicts keyed by URL."""
    candidates = list(candidates)
    if not candidates:
        return {}
    with ThreadPoolExecutor(max_workers=max(1, min(workers, len(candidates)))) as pool:
        futures = {c.url: pool.submit(identify, c, policy, fetcher, timeout) for c in candidates}
        return {url: f.result() for url, f in futures.items()}

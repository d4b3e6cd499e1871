from camscout.liveness import LivenessPolicy, classify, identify, identify_all, sample_mjpeg, sample_still
from camscout.models import CandidateLink, Label, MediaKind


class FakeClock:
    def __init__(self):
        self.now = 100.0
        self.sleeps = []

    def __call__(self):
        return self.now

    def sleep(self, s):
        self.sleeps.append(s)
        self.now += s


class ListFetcher:
    """Returns queued bodies; each get also advances the fake clock."""

    def __init__(self, bodies, clock, cost=0.0):
        self.bodies = list(bodies)
        self.clock = clock
        self.cost = cost

    def get(self, url, timeout=None, **kw):
        from camscout.fetch import Response

        self.clock.now += self.cost
        return Response(url, 200, {}, self.bodies.pop(0))


def test_sample_schedule_is_anchored_to_start():
    clock = FakeClock()
    fetcher = ListFetcher([b"a", b"b", b"c"], clock, cost=3.0)
    policy = LivenessPolicy(n_samples=3, sample_interval=20.0)
    ss = sample_still("http://x/cam.jpg", policy, fetcher, sleep=clock.sleep, clock=clock)
    # Fetch time is absorbed: waits are 20-3 each, not a flat 20.
    assert clock.sleeps == [17.0, 17.0]
    assert len(ss.samples) == 3 and ss.interval == 20.0


def test_sample_spacing_against_fleet(fleet_factory, fetcher):
    fleet = fleet_factory(static_images=1, rotating_images=1, rotation_period=0.3)
    policy = LivenessPolicy(n_samples=3, sample_interval=0.4)
    for ep, expected in ((fleet.cameras()[0], Label.STATIC), (fleet.cameras()[1], Label.LIVE)):
        ss = sample_still(fleet.url(ep.path), policy, fetcher)
        assert len(ss.samples) == 3
        gaps = [(b.captured_at - a.captured_at).total_seconds() for a, b in zip(ss.samples, ss.samples[1:])]
        assert all(g >= 0.35 for g in gaps), gaps
        assert classify(ss, policy).label is expected


def test_missing_endpoint_is_indeterminate(fleet_factory, fetcher):
    fleet = fleet_factory(static_images=1)
    policy = LivenessPolicy(n_samples=2, sample_interval=0.05)
    ss = sample_still(fleet.url("/cam/static/99.jpg"), policy, fetcher)
    assert ss.samples == [] and [f["error"] for f in ss.failures] == ["http", "http"]
    v = classify(ss, policy)
    assert v.label is Label.INDETERMINATE and v.detail["failures"]


def test_mjpeg_sampling(fleet_factory, fetcher):
    fleet = fleet_factory(mjpeg_streams=1, frame_period=0.1)
    policy = LivenessPolicy(n_samples=3, sample_interval=0.3)
    ss = sample_mjpeg(fleet.url("/mjpg/0/video.mjpg"), policy, fetcher)
    assert len(ss.samples) == 3
    assert classify(ss, policy).label is Label.LIVE


def test_identify_dispatch(fleet_factory, fetcher):
    fleet = fleet_factory(static_images=1, rotating_images=1, mjpeg_streams=1, hls_streams=1,
                          rotation_period=0.2, frame_period=0.1, segment_period=0.2)
    policy = LivenessPolicy(n_samples=2, sample_interval=0.5)
    kinds = {
        "/cam/static/0.jpg": MediaKind.STILL_IMAGE,
        "/cam/rotating/0.jpg": MediaKind.STILL_IMAGE,
        "/mjpg/0/video.mjpg": MediaKind.MJPEG_STREAM,
        "/hls/0/master.m3u8": MediaKind.HLS_STREAM,
    }
    cands = [CandidateLink(fleet.url(p), k, fleet.index_url) for p, k in kinds.items()]
    cands.append(CandidateLink("rtsp://127.0.0.1/stream0", MediaKind.RTSP_LINK, fleet.index_url))
    verdicts = identify_all(cands, policy, fetcher, workers=8)
    got = {c.url: verdicts[c.url].label.value for c in cands}
    for p in kinds:
        assert got[fleet.url(p)] == fleet.ground_truth(p)
    rtsp = verdicts["rtsp://127.0.0.1/stream0"]
    assert rtsp.label is Label.INDETERMINATE and "not sampled" in rtsp.detail["reason"]


def test_identify_all_empty(fetcher):
    assert identify_all([], LivenessPolicy(), fetcher) == {}


def test_identify_single(fleet_factory, fetcher):
    fleet = fleet_factory(static_images=1)
    c = CandidateLink(fleet.url("/cam/static/0.jpg"), MediaKind.STILL_IMAGE, fleet.index_url)
    v = identify(c, LivenessPolicy(n_samples=2, sample_interval=0.05), fetcher)
    assert v.label is Label.STATIC and len(v.evidence) == 1

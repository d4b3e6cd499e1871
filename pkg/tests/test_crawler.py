import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from camscout.crawler import (
    CrawlConfig,
    Crawler,
    crawl,
    extract_candidate_links,
    extract_page_links,
)
from camscout.fetch import HttpFetcher
from camscout.models import MediaKind
from camscout.urls import normalize_url
from stubserver import Route, StubServer


def html(body):
    return Route(f"<html><body>{body}</body></html>".encode(), ctype="text/html; charset=utf-8")


def config(*seeds, **kw):
    kw.setdefault("per_host_min_delay_ms", 0)
    return CrawlConfig(seeds=seeds, **kw)


class TestExtraction:
    BASE = "http://example.com/dir/page.html"

    def test_kinds(self):
        page = """
        <img src="snap.jpg"><a href="/live/cam.JPEG">still</a>
        <a href="/axis-cgi/mjpg/video.cgi">mjpeg</a>
        <video><source src="https://cdn.example.com/x/index.m3u8"></video>
        <script>var s = "rtsp://10.0.0.5:554/ch1"; var r = 'rtmp://media.example.com/live';</script>
        <a href="about.html">about</a><img src="data:image/png;base64,AAAA">
        """
        found = {c.url: c.media_kind for c in extract_candidate_links(page, self.BASE)}
        assert found == {
            "http://example.com/dir/snap.jpg": MediaKind.STILL_IMAGE,
            "http://example.com/live/cam.JPEG": MediaKind.STILL_IMAGE,
            "http://example.com/axis-cgi/mjpg/video.cgi": MediaKind.MJPEG_STREAM,
            "https://cdn.example.com/x/index.m3u8": MediaKind.HLS_STREAM,
            "rtsp://10.0.0.5/ch1": MediaKind.RTSP_LINK,
            "rtmp://media.example.com/live": MediaKind.RTMP_LINK,
        }

    def test_dedup_and_source_depth(self):
        page = '<img src="a.jpg"><img src="./a.jpg#x"><a href="A.jpg">other</a>'
        found = extract_candidate_links(page, self.BASE, depth=2)
        assert sorted(c.url for c in found) == ["http://example.com/dir/A.jpg", "http://example.com/dir/a.jpg"]
        assert all(c.depth == 2 and c.source_page == self.BASE for c in found)

    def test_lenient_markup(self):
        page = '<div><p><img src="one.jpg"<img src=two.jpg><a href="three.png">x</div></p></span>'
        urls = {c.url.rsplit("/", 1)[1] for c in extract_candidate_links(page, self.BASE)}
        assert {"three.png"} <= urls

    def test_page_links(self):
        page = ('<a href="/a">a</a><a href="mailto:x@y">m</a><a href="http://other.org/b">b</a>'
                '<iframe src="frame.html"></iframe><a href="/a#top">dup</a>')
        assert extract_page_links(page, self.BASE) == [
            "http://example.com/a", "http://other.org/b", "http://example.com/dir/frame.html"]
        assert extract_page_links(page, self.BASE, restrict_host="example.com") == [
            "http://example.com/a", "http://example.com/dir/frame.html"]

    @settings(max_examples=100)
    @given(st.text(max_size=300))
    def test_never_raises(self, text):
        for c in extract_candidate_links(text, self.BASE):
            assert normalize_url(c.url) == c.url


class TestCrawl:
    def test_depth_one_finds_exactly_five(self):
        imgs = "".join(f'<img src="/img/{i}.jpg">' for i in range(5))
        routes = {"/": html('<a href="/gallery.html">g</a>'), "/gallery.html": html(imgs),
                  "/deeper.html": html('<img src="/img/deep.jpg">')}
        routes["/gallery.html"] = html(imgs + '<a href="/deeper.html">more</a>')
        with StubServer(routes) as s:
            found = crawl(config(s.url("/"), max_depth=1))
        assert sorted(c.url for c in found) == [s.url(f"/img/{i}.jpg") for i in range(5)]
        assert all(c.depth == 1 for c in found)
        assert "/deeper.html" not in s.paths()

    def test_depth_zero_only_seed(self):
        with StubServer({"/": html('<img src="/a.jpg"><a href="/p.html">p</a>')}) as s:
            found = crawl(config(s.url("/"), max_depth=0))
            assert [c.url for c in found] == [s.url("/a.jpg")]
            assert "/p.html" not in s.paths()

    def test_max_pages_one(self):
        routes = {"/": html('<a href="/p1.html">1</a><a href="/p2.html">2</a>'),
                  "/p1.html": html("x"), "/p2.html": html("y")}
        with StubServer(routes) as s:
            c = Crawler(config(s.url("/"), max_depth=3, max_pages=1))
            c.run()
            assert c.fetched == [s.url("/")]
            assert [p for p in s.paths() if p != "/robots.txt"] == ["/"]

    def test_politeness_between_seeds_on_one_host(self):
        with StubServer({"/a.html": html("a"), "/b.html": html("b")}) as s:
            crawl(config(s.url("/a.html"), s.url("/b.html"), per_host_min_delay_ms=500))
            stamps = [t for t, _, _ in s.log]
        assert len(stamps) == 3  # robots.txt plus two pages
        assert all(b - a >= 0.5 for a, b in zip(stamps, stamps[1:]))

    def test_robots_respected(self, fleet_factory):
        fleet = fleet_factory(static_images=1, decoy_pages=1)
        c = Crawler(config(fleet.index_url, max_depth=2))
        found = c.run()
        paths = [r["path"] for r in fleet.request_log()]
        assert "/private/hidden.html" not in paths
        assert fleet.url("/private/cam.jpg") not in {f.url for f in found}
        assert any(e.error == "robots_disallowed" for e in c.report)

    def test_robots_missing_means_allow(self):
        routes = {"/": html('<a href="/private/x.html">x</a>'), "/private/x.html": html('<img src="c.jpg">')}
        with StubServer(routes) as s:
            found = crawl(config(s.url("/"), max_depth=1))
        assert [c.url for c in found] == [s.url("/private/c.jpg")]

    def test_user_agent_sent(self):
        with StubServer({"/": html("")}) as s:
            crawl(config(s.url("/"), user_agent="survey-bot/9"))
            assert {ua for _, _, ua in s.log} == {"survey-bot/9"}

    def test_unreachable_seed_reported(self):
        with StubServer({"/": html('<img src="/ok.jpg">')}) as s:
            c = Crawler(config("http://127.0.0.1:9/", s.url("/"), request_timeout=2))
            found = c.run()
        assert [f.url for f in found] == [s.url("/ok.jpg")]
        bad = [e for e in c.report if e.url == "http://127.0.0.1:9/"]
        assert bad and bad[0].error == "connect"

    def test_non_html_not_parsed(self):
        routes = {"/": html('<a href="/data.bin">d</a>'),
                  "/data.bin": Route(b"<img src='/hidden.jpg'>", ctype="application/octet-stream")}
        with StubServer(routes) as s:
            c = Crawler(config(s.url("/"), max_depth=1))
            assert c.run() == []
        assert [e.error for e in c.report if e.url.endswith("data.bin")] == ["not_html"]

    def test_http_error_recorded(self):
        with StubServer({}) as s:
            c = Crawler(config(s.url("/nope.html")))
            c.run()
        assert c.report[0].status == 404 and c.report[0].error == "http"

    def test_candidates_not_crawled(self, fleet_factory):
        fleet = fleet_factory(static_images=2, mjpeg_streams=1, hls_streams=1)
        crawl(config(fleet.index_url, max_depth=2))
        paths = {r["path"] for r in fleet.request_log()}
        assert not any(p.startswith(("/cam/", "/mjpg/", "/hls/")) for p in paths)

    def test_same_host_only(self):
        with StubServer({"/": html("")}) as other, StubServer({}) as s:
            s.routes["/"] = html(f'<a href="{other.url("/")}">o</a><a href="/in.html">i</a>')
            s.routes["/in.html"] = html("")
            crawl(config(s.url("/"), max_depth=1, same_host_only=True))
            assert other.paths() == []
            assert "/in.html" in s.paths()

    @pytest.mark.parametrize("kw", [{"max_depth": -1}, {"max_pages": 0}, {"fan_out": 0}])
    def test_config_validation(self, kw):
        with pytest.raises(ValueError):
            config("http://example.com/", **kw)

    def test_no_seeds(self):
        with pytest.raises(ValueError):
            CrawlConfig(seeds=())

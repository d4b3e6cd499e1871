import pytest

from camscout import kernels
from camscout.fetch import HttpFetcher
from camscout.mockfleet import FleetSpec, start_fleet

_ACCEPTANCE_RESULTS = {}


@pytest.fixture
def fleet_factory():
    started = []

    def make(**kw):
        fleet = start_fleet(FleetSpec(**kw))
        started.append(fleet)
        return fleet

    yield make
    for f in started:
        f.stop()


@pytest.fixture
def fetcher():
    return HttpFetcher(timeout=5.0)


@pytest.fixture(params=sorted(kernels.available_backends()))
def kernel_backend(request, monkeypatch):
    """Run a test once per importable kernel implementation."""
    impl = kernels.available_backends()[request.param]
    monkeypatch.setattr(kernels, "count_changed", impl.count_changed)
    monkeypatch.setattr(kernels, "luma_sum_milli", impl.luma_sum_milli)
    return request.param


def pytest_runtest_logreport(report):
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        if "test_acceptance.py" in report.nodeid:
            name = report.nodeid.split("::")[-1]
            _ACCEPTANCE_RESULTS[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in sorted(_ACCEPTANCE_RESULTS.items()):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  {name}")

import os
from collections import defaultdict

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo", max_examples=int(os.environ.get("HYPOTHESIS_EXAMPLES", "25")), deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

_OUTCOMES: dict[int, list[tuple[str, str]]] = defaultdict(list)
_DETAILS: dict[int, list[str]] = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n): part of acceptance criterion n")
    config.addinivalue_line("markers", "slow: long-running numerical study")


@pytest.fixture
def acceptance_note(request):
    """Attach a measured value to the criterion of the running test."""
    mark = request.node.get_closest_marker("acceptance")

    def note(text: str) -> None:
        if mark is not None:
            _DETAILS[mark.args[0]].append(f"{request.node.name}: {text}")

    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = "passed" if rep.passed else ("skipped" if rep.skipped else "failed")
        _OUTCOMES[mark.args[0]].append((item.name, status))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        parts = _OUTCOMES[n]
        failed = [name for name, s in parts if s == "failed"]
        ran = [name for name, s in parts if s != "skipped"]
        verdict = "FAIL" if failed or not ran else "PASS"
        extra = f" (failed: {', '.join(failed)})" if failed else ""
        tr.write_line(f"criterion {n}: {verdict} [{len(ran)} checks]{extra}")
        for d in _DETAILS.get(n, []):
            tr.write_line(f"    {d}")

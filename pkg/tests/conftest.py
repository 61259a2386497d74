import time
from contextlib import contextmanager

import pytest

_RESULTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_RESULTS] = []


@pytest.fixture
def criterion(request):
    """``with criterion(3, "title", limit_s) as note:`` records one acceptance line."""
    results = request.config.stash[_RESULTS]

    @contextmanager
    def check(number: int, title: str, limit: float):
        notes: list[str] = []
        t0 = time.perf_counter()
        try:
            yield notes.append
        except BaseException as exc:
            results.append((number, "FAIL", title, time.perf_counter() - t0, f"{type(exc).__name__}: {exc}"))
            raise
        elapsed = time.perf_counter() - t0
        if elapsed > limit:
            results.append((number, "FAIL", title, elapsed, f"took {elapsed:.1f}s, limit {limit:g}s"))
            pytest.fail(f"criterion {number} exceeded its {limit:g}s budget ({elapsed:.1f}s)")
        results.append((number, "PASS", title, elapsed, "; ".join(notes)))

    return check


def pytest_terminal_summary(terminalreporter, config):
    results = sorted(config.stash[_RESULTS])
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number, verdict, title, elapsed, detail in results:
        line = f"[{verdict}] criterion {number:2d}: {title} ({elapsed:.2f}s)"
        if detail:
            line += f" | {detail}"
        terminalreporter.write_line(line)

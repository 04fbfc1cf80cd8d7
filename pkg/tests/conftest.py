import functools

import pytest

from polyclinch.auction import run_auction
from polyclinch.instances import corpus

MAIN_SEED = 1
SMALL_SEED = 2


@functools.lru_cache(maxsize=None)
def main_runs(count=500):
    """Random instances with n <= 6, f(N) <= 8 over all families, with outcomes."""
    return tuple((inst, run_auction(inst)) for inst in corpus(count, seed=MAIN_SEED, max_n=6, max_supply=8))


@functools.lru_cache(maxsize=None)
def small_runs(count=300):
    """Smaller instances (n <= 5, f(N) <= 6) for the exhaustive oracles."""
    return tuple((inst, run_auction(inst)) for inst in corpus(count, seed=SMALL_SEED, max_n=5, max_supply=6))


_acceptance = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    rep = outcome.get_result()
    number, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        _acceptance[number] = (title, rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        title, passed = _acceptance[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {title}")

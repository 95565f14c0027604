import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from coarse_lab.core import Entourage, Space

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def relations(max_n=8):
    """Strategy for (n, pair-set) with pairs drawn on ``range(n)``."""

    @st.composite
    def build(draw):
        n = draw(st.integers(1, max_n))
        pairs = draw(st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=n * n))
        return n, frozenset(pairs)

    return build()


def entourage(n, pairs):
    return Entourage(Space.range(n), sorted(pairs))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion(request):
    """Record one pass/fail line per acceptance criterion for the terminal summary."""
    state = {}

    def start(number: int, title: str):
        state["number"], state["title"] = number, title
        state["details"] = []

    def log(message: str):
        state["details"].append(message)
        print(message)

    start.log = log
    yield start
    if "number" not in state:
        return
    rep = getattr(request.node, "rep_call", None)
    ok = rep is not None and rep.passed
    line = f"criterion {state['number']:>2}: {'PASS' if ok else 'FAIL'}  {state['title']}"
    CRITERIA[state["number"]] = line
    print(line)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[number])

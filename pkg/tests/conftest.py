import itertools
import os

import pytest
from hypothesis import HealthCheck, settings

from lazylab.constructions import example_graph
from lazylab.multigraph import build_graph
from lazylab.oracle import Subgraph

settings.register_profile("default", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=30, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

S, A, B, C, D, E, T = range(7)


@pytest.fixture
def example():
    return example_graph()


def all_subgraphs(g):
    for mask in range(1 << g.m):
        yield Subgraph.from_mask(g, mask)


def series(k):
    return build_graph(k + 1, [(i, i + 1) for i in range(k)], 0, k)


def parallel(k):
    return build_graph(2, [(0, 1)] * k, 0, 1)


ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_LINES] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def verdict(request, capsys):
    """Record one PASS/FAIL line for an acceptance criterion.

    Call ``verdict(number, title, checks, detail)``; ``checks`` maps check names
    to booleans.  A test that errors before calling it is reported as FAIL.
    """
    lines = request.config.stash[ACCEPTANCE_LINES]
    state = {}

    def record(number: int, title: str, checks: dict, detail: str = ""):
        ok = all(checks.values())
        failed = [k for k, v in checks.items() if not v]
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}"
        if detail:
            line += f" | {detail}"
        if failed:
            line += f" | failed checks: {', '.join(failed)}"
        state["number"] = number
        lines.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    yield record
    if "number" not in state:
        marker = request.node.get_closest_marker("criterion")
        number = marker.args[0] if marker else "?"
        lines.append(f"criterion {number} FAIL: {request.node.name} raised before reaching its verdict")

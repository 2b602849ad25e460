import math

import hypothesis
import hypothesis.strategies as st
import numpy as np
import pytest

from tepcuts.fixtures import load_fixture
from tepcuts.instance import Bus, Corridor, Line, TepInstance, validate

hypothesis.settings.register_profile("default", deadline=None, max_examples=25)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=5)
hypothesis.settings.load_profile("default")

np.seterr(all="warn")

DESK_FIXTURES = ("fig1_variant", "fig2_toy", "garver6")


@pytest.fixture(scope="session")
def fig1():
    return load_fixture("fig1")


@pytest.fixture(scope="session")
def fig1v():
    return load_fixture("fig1_variant")


@pytest.fixture(scope="session")
def fig2():
    return load_fixture("fig2_toy")


@pytest.fixture(scope="session")
def garver():
    return load_fixture("garver6")


reactances = st.sampled_from([0.1, 0.2, 0.25, 0.4, 0.5])
capacities = st.sampled_from([0.5, 1.0, 1.5, 2.0])


@st.composite
def instances(draw, max_buses=5, max_binaries=5, connected=None, limits=(math.inf, 1.0, 0.4)):
    """Small random networks.

    Every bus carries local generation covering its own demand, so every
    build decision is feasible and the optimum depends on cheap imports.
    """
    n = draw(st.integers(3, max_buses))
    buses = [Bus(0, 0.0, draw(st.sampled_from([2.0, 4.0])), 1.0)]
    for b in range(1, n):
        d = draw(st.sampled_from([0.0, 0.3, 0.6, 1.0]))
        buses.append(Bus(b, d, d, draw(st.sampled_from([5.0, 10.0]))))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), min_size=n - 1, max_size=len(pairs),
                           unique=True))
    if connected is None:
        connected = draw(st.booleans())
    if connected:
        # a spanning chain of existing lines keeps the established graph connected
        chosen = sorted(set(chosen) | {(b, b + 1) for b in range(n - 1)})
    budget = max_binaries
    corridors = []
    for i, j in sorted(chosen):
        must_exist = connected and j == i + 1
        n_exist = 1 if must_exist else draw(st.integers(0, 1))
        n_cand = draw(st.integers(0 if n_exist else 1, min(2, budget))) if budget else 0
        if n_exist == 0 and n_cand == 0:
            continue
        budget -= n_cand
        x, cap = draw(reactances), draw(capacities)
        existing = tuple(Line(draw(reactances), draw(capacities)) for _ in range(n_exist))
        cands = (Line(x, cap, float(draw(st.integers(1, 4)))),) * n_cand
        corridors.append(Corridor(i, j, existing, cands, math.inf))
    angle = draw(st.sampled_from(limits))
    corridors = tuple(Corridor(c.from_bus, c.to_bus, c.existing, c.candidates, angle)
                      for c in corridors)
    return validate(TepInstance(tuple(buses), corridors, 1.0, angle, "random"))


# -- acceptance reporting ----------------------------------------------------

CRITERIA = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line per acceptance criterion; returns the verdict."""
    lines = request.config.stash.setdefault(CRITERIA, [])

    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        lines.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(CRITERIA, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)

import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("ci", max_examples=50, deadline=None)
settings.register_profile("dev", max_examples=15, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

ROOT = Path(__file__).resolve().parents[1]
GRAPHS = ROOT / "configs" / "graphs"


@pytest.fixture
def flu():
    from fairshift.graph import load_graph
    return load_graph(GRAPHS / "flu.graph")


@pytest.fixture
def aki():
    from fairshift.graph import load_graph
    return load_graph(GRAPHS / "aki.graph")


@pytest.fixture
def aki_bun():
    from fairshift.graph import load_graph
    return load_graph(GRAPHS / "aki_bun.graph")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

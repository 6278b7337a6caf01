import numpy as np
import pytest

from divfuzz.roadmap import load_map
from divfuzz.scenario import shipped_seeds

ACCEPTANCE_LINES: list[str] = []


def pytest_addoption(parser):
    parser.addoption("--run-nightly", action="store_true", help="run hour-scale statistical campaigns")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-nightly"):
        return
    skip = pytest.mark.skip(reason="nightly campaign; pass --run-nightly")
    for item in items:
        if "nightly" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def s1():
    return load_map("s1")


@pytest.fixture(scope="session")
def s4():
    return load_map("s4")


@pytest.fixture(scope="session")
def s1_seeds(s1):
    return shipped_seeds("s1", s1)


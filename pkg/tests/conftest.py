import numpy as np
import pytest
from hypothesis import settings

from bcplink import channel as ch
from bcplink.dielectric import default_materials

settings.register_profile("ci", deadline=None, max_examples=60)
settings.load_profile("ci")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def db():
    return default_materials()


@pytest.fixture(scope="session")
def geom():
    return ch.reference_geometry()


@pytest.fixture(scope="session")
def layered():
    return ch.layered_stack()


@pytest.fixture(scope="session")
def muscle():
    return ch.muscle_stack()


@pytest.fixture
def rng():
    return np.random.default_rng(20241015)

import numpy as np
import pytest

from levy_scl import AtomicMeasure, Field, Grid1D
from levy_scl.levy_noise import JumpPath
from levy_scl.presets import PresetRef, build_noise

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def grid():
    return Grid1D(-8.0, 8.0, 400)


@pytest.fixture
def single_atom():
    return AtomicMeasure(atoms=((1.0, 2.0),))


@pytest.fixture
def linear_noise():
    return build_noise(PresetRef.make("linear_u", scale=0.2))


@pytest.fixture
def empty_path():
    return JumpPath(2.0, 0.5, np.empty(0), np.empty(0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def gaussian_field(grid, amp=1.0, width=0.5, center=0.0):
    return Field.from_function(
        grid, lambda x: amp * np.exp(-((x - center) ** 2) / (2 * width**2))
    )

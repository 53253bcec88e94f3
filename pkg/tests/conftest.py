from __future__ import annotations

import math

import numpy as np
import pytest

from growthctl.model import ModelParams, State
from growthctl.regimes import Scenario
from reference import log_uniform

BASE = dict(k_M=1.0, k_E=1.0, a_M=1.0, a_E=1.0, b_M=2.0, b_E=1.0)


def params(**kw) -> ModelParams:
    return ModelParams(**{**BASE, **kw})


def random_params(rng) -> ModelParams:
    return ModelParams(*log_uniform(rng, 0.1, 10.0, 6))


def random_state(rng) -> State:
    x = rng.uniform(0.0, 10.0, 3)
    x[2] = max(x[2], 0.1)
    return State(*x)


def random_scenario(rng, T_range=(0.1, 10.0)) -> Scenario:
    return Scenario(random_params(rng), random_state(rng), float(log_uniform(rng, *T_range)))


@pytest.fixture
def linear_scenario() -> Scenario:
    return Scenario(params(), State(100.0, 0.0, 1.0), 0.5)


@pytest.fixture
def explin_scenario() -> Scenario:
    return Scenario(params(), State(100.0, 0.0, 1.0), 2.0)


@pytest.fixture
def exponential_scenario() -> Scenario:
    return Scenario(params(b_M=1.0, b_E=2.0), State(100.0, 0.0, 1.0), 1.0)


@pytest.fixture
def linstat_scenario() -> Scenario:
    return Scenario(params(a_E=2.0), State(2.0, 0.0, 1.0), 10.0)


@pytest.fixture
def expstat_scenario() -> Scenario:
    return Scenario(params(b_M=1.0, b_E=2.0, a_M=2.0), State(2.0 * (math.e - 1.0), 0.0, 1.0), 5.0)


@pytest.fixture
def explinstat_scenario() -> Scenario:
    return Scenario(params(), State(10.0, 0.0, 1.0), 6.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one PASS/FAIL line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def report_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"criterion {number} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])

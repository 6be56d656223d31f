import sys
from pathlib import Path

import pytest

from impulsive_dde.model import (
    DelayTerm,
    DeviationDescriptor,
    FunctionDescriptor,
    ImpulseSchedule,
    ProblemSpec,
)

sys.path.insert(0, str(Path(__file__).parent))

PROBLEMS = Path(__file__).resolve().parents[1] / "problems"


def lag_spec(a, d, impulses=None, **kw):
    """x' + a x(t - d) = r with the given impulse schedule."""
    term = DelayTerm(FunctionDescriptor.constant(a), DeviationDescriptor.lag(d))
    return ProblemSpec(terms=(term,), impulses=impulses or ImpulseSchedule(), **kw)


def sign_change_spec(count=30, **kw):
    kw.setdefault("initial_value", 1.0)
    return lag_spec(1.0, 1 / 3, ImpulseSchedule.periodic(1 / 3, count, 1 / 6), **kw)


def positive_kernel_spec(count=40, multiplier=1.5):
    return lag_spec(0.5, 0.3, ImpulseSchedule.periodic(1.0, count, multiplier), initial_value=1.0)


def halving_ode_spec(count=40):
    """x' + x = 0 with x(j) = x(j - 0) / 2, so X(t) = 2^-floor(t) e^-t."""
    return lag_spec(1.0, 0.0, ImpulseSchedule.periodic(1.0, count, 0.5), initial_value=1.0)


@pytest.fixture
def sign_change():
    return sign_change_spec()


@pytest.fixture
def positive_kernel():
    return positive_kernel_spec()


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

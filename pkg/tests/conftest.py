import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cfou.rkhs import PiecewiseSmoothFn as P

settings.register_profile(
    "default",
    max_examples=30,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def rkhs_pairs():
    """Ten (f, g) pairs on [0, 2]: indicators, exponentials, polynomials."""
    e1 = P.exponential(1.0, 0.0, 1.0)
    ec = P.exponential(complex(1.0, -1.0), 0.0, 2.0)
    e2 = P.exponential(0.5, 0.5, 2.0, scale=2.0)
    p1 = P.polynomial([0.0, 1.0], 0.0, 2.0)
    p2 = P.polynomial([1.0, -1.0, 0.25], 0.0, 2.0)
    i1 = P.indicator(0.0, 1.0)
    i2 = P.indicator(0.5, 1.5)
    i3 = P.indicator(1.0, 2.0)
    return [
        (i1, i1),
        (i1, i3),
        (i2, P.indicator(0.0, 2.0)),
        (e1, e1),
        (e1, i2),
        (ec, ec),
        (ec, e2),
        (p1, p1),
        (p2, e1),
        (P.polynomial([0.0, 1.0], 0.0, 1.0) + P.indicator(1.0, 2.0, 0.5), e2),
    ]


@pytest.fixture(scope="session")
def pairs():
    return rkhs_pairs()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

import functools
import math

import numpy as np
import pytest
from hypothesis import settings

from speclap import KernelEvaluator, build_domain

settings.register_profile("speclap", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("speclap")

PI = math.pi


def green_half(x, y):
    """Closed form of the order-1/2 Green function on (0, pi)."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    return np.log(np.sin((x + y) / 2) / np.sin(np.abs(x - y) / 2)) / PI


def poisson_half(x):
    return 1.0 / (PI * np.tan(np.asarray(x, dtype=float) / 2))


def kappa_half(x):
    return 2.0 / (PI * np.sin(np.asarray(x, dtype=float)))


@functools.lru_cache(maxsize=None)
def evaluator(s):
    return KernelEvaluator(build_domain(), s)


@pytest.fixture(scope="session")
def interval():
    return build_domain()


@pytest.fixture(scope="session")
def rectangle():
    return build_domain("rectangle", truncation=(16, 16))


ACCEPTANCE = []


def record(number, title, passed, detail):
    """Store one acceptance line; all lines are printed in the terminal summary."""
    line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE.append((number, line))
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)

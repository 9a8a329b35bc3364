from __future__ import annotations

import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from ldpcsched import build_ab_code, build_regular_code, lift_code  # noqa: E402

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def H35():
    return build_ab_code(3, 5)


@pytest.fixture(scope="session")
def H37():
    return build_ab_code(3, 7)


@pytest.fixture(scope="session")
def H196():
    """Girth-6 (3,6)-regular code with n = 196."""
    return build_regular_code(3, 6, 196, seed=1, min_girth=6)


@pytest.fixture(scope="session")
def H37_lifted():
    return lift_code(build_ab_code(3, 7), 4, seed=0)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])

import numpy as np
import pytest

from rewardteach import fixed_instance


@pytest.fixture
def fixed():
    return fixed_instance()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one verdict line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split("-")[1].rstrip("ab"))):
        terminalreporter.write_line(ACCEPTANCE[key])

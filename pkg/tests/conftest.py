import sys
from pathlib import Path

import pytest
from hypothesis import settings

from nashlab import game

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def g1():
    return game.g_one()


@pytest.fixture
def gdisc():
    return game.g_disc()


@pytest.fixture
def seed7():
    return game.generate_random_episodic(3, 2, 2, 2, 7)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)

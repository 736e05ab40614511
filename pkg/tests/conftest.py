import copy
import json
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"


@pytest.fixture
def meditation():
    """The scripted meditation scenario as a dict (a fresh copy per test)."""
    return copy.deepcopy(json.loads((SCENARIOS / "meditation.json").read_text()))


@pytest.fixture
def meditation_prompt():
    return (SCENARIOS / "meditation.prompt.txt").read_text().strip()


def pytest_terminal_summary(terminalreporter):
    module = __import__("sys").modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

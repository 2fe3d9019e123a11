import json
import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from itscatter.config import parse_scenario  # noqa: E402
from itscatter.geometry import PathOptions, trace_path  # noqa: E402
from itscatter.pes import CollisionSystem, make_surface  # noqa: E402

ACCEPTANCE_LINES = []


def shipped_scenarios():
    root = resources.files("itscatter") / "scenarios"
    return sorted((p.name, p.read_text()) for p in root.iterdir() if p.name.endswith(".json"))


def shipped_scenario(name):
    text = (resources.files("itscatter") / "scenarios" / name).read_text()
    return json.loads(text), parse_scenario(text)


TWO_CHANNEL = {"omega_in": 1.0, "omega_out": 2.0, "switch_length": 1.0,
               "barrier_height": 0.3, "barrier_width": 2.0,
               "bend_height": 0.5, "bend_length": 3.0}


@pytest.fixture(scope="session")
def system():
    return CollisionSystem(1.0, 1.0, 1.0, E=2.5, E_kin_in=2.0)


@pytest.fixture(scope="session")
def two_channel_path(system):
    s = make_surface("two-channel-harmonic", TWO_CHANNEL, system)
    return trace_path(s, system, PathOptions(x_range=(-45.0, 45.0)))


@pytest.fixture(scope="session")
def flat_path(system):
    s = make_surface("flat-channel", {"omega": 0.8})
    return trace_path(s, system, PathOptions(x_range=(-25.0, 25.0)))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

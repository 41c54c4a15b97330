import importlib.resources

import pytest

from gridid.ingest import parse_case_script
from gridid.netmodel import build_admittance
from gridid.simgen import generate_scenarios, measure, solve_scenarios

CASE14_PATH = importlib.resources.files("gridid") / "data" / "case14.m"


@pytest.fixture(scope="session")
def case14_text() -> str:
    return CASE14_PATH.read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def case14(case14_text):
    return parse_case_script(case14_text)


@pytest.fixture(scope="session")
def y14(case14):
    """Physical-mode admittance matrix of the 14-bus system."""
    return build_admittance(case14)


@pytest.fixture(scope="session")
def meas14(case14):
    """Noiseless 15-slot phasor campaign over all 14 buses."""
    scenarios = generate_scenarios(case14, 15, 0.8, 1.2, seed=7)
    return measure(solve_scenarios(scenarios), case14.bus_ids)

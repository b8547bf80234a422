"""The shipped reference program, scenario and suite."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .harness import TestSuite, load_suite
from .program import Program, parse_program
from .world import ScenarioSpec, load_scenario

DATA = Path(str(resources.files("robomut") / "data"))
PROGRAM_PATH = DATA / "reference.rbt"
SCENARIO_PATH = DATA / "reference_scenario.json"
SUITE_PATH = DATA / "reference_suite.json"
DEFAULT_SEED = 42
DEFAULT_ROUNDS = 5


def reference_program() -> Program:
    return parse_program(PROGRAM_PATH.read_text(encoding="utf-8"))


def reference_scenario() -> ScenarioSpec:
    return load_scenario(SCENARIO_PATH)


def reference_suite() -> TestSuite:
    return load_suite(SUITE_PATH)

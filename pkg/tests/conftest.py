import copy
import json

import numpy as np
import pytest

from spherectl.scenario import build_scenario, load_shipped, shipped_scenario_path


def raw_scenario(name="s2_six_star") -> dict:
    return json.loads(shipped_scenario_path(name).read_text())


def free_scenario(dimension=2, target=None, **planner):
    """Obstacle-free scenario on S^dimension built from the shipped S^2 defaults."""
    data = raw_scenario()
    data["dimension"] = dimension
    data["target"] = target if target is not None else [0.0] * dimension + [1.0]
    data["obstacles"] = []
    data["seeds"] = {"points": [[1.0] + [0.0] * dimension], "velocity": "zero"}
    data["planner"].update(planner)
    return build_scenario(copy.deepcopy(data))


@pytest.fixture(scope="session")
def six_star():
    return load_shipped("s2_six_star")


@pytest.fixture(scope="session")
def s3():
    return load_shipped("s3_attitude")


@pytest.fixture(scope="session")
def free_s2():
    return free_scenario()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance_line():
    """Record the one-line verdict of an acceptance criterion."""

    def record(number: int, title: str, passed: bool, detail: str = "") -> None:
        _ACCEPTANCE[number] = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        print(_ACCEPTANCE[number])

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[key])

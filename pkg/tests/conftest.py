import numpy as np
import pytest

from rcs.dist import ModelGroup, OutputSpace


def philox(seed: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


@pytest.fixture
def rng():
    return philox(12345)


@pytest.fixture
def worked():
    """p1 = p2 = [0.5, 0.5, 0], p3 = [0, 0, 1], s = 2, U = {2}; model 2 is the colluder."""
    space = OutputSpace(3, frozenset({2}))
    return ModelGroup.from_models([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]], 2, space,
                                  truth_labels=(True, True, False))


@pytest.fixture
def disjoint():
    return ModelGroup.from_models([[1.0, 0.0], [0.0, 1.0]], 1, OutputSpace(2, frozenset({1})))


@pytest.fixture
def identical():
    row = [0.2, 0.5, 0.3]
    return ModelGroup.from_models([row] * 4, 3, OutputSpace(3, frozenset({2})),
                                  truth_labels=(True,) * 4)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    report = getattr(mod, "REPORT", None)
    if report:
        terminalreporter.section("acceptance criteria")
        for num in sorted(report):
            terminalreporter.write_line(report[num])

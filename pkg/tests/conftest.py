import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from alignsteer import builtin_model, solve_refined_static  # noqa: E402

FOUR_X_STAR = np.array([0.25, 0.25, 0.25, 0.25])
FOUR_U_STAR = np.array([0.25, 0.25, 0.0, 0.0])


@pytest.fixture(scope="session")
def four():
    return builtin_model("four-state")


@pytest.fixture(scope="session")
def identity():
    return builtin_model("identity")


@pytest.fixture(scope="session")
def four_sp(four):
    model, x_init = four
    return solve_refined_static(model, x_init)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)

import numpy as np
import pytest

from rangeann import BuildParams, PointSet, build_index, synth_clustered


def line_points(*xs) -> PointSet:
    return PointSet(np.asarray(xs, dtype=np.float32).reshape(-1, 1))


@pytest.fixture(scope="session")
def small_instance():
    """2K clustered points with a built graph, shared by many tests."""
    syn = synth_clustered(2000, 16, 20, seed=7)
    G = build_index(syn.points, BuildParams(R=32, L=64, alpha=1.15, seed=7))
    return syn, G


# one line per acceptance criterion, echoed after the test session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

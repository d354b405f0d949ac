import numpy as np
import pytest

from alignbench.rng import Rng64


@pytest.fixture
def rng():
    return Rng64(20240611)


def random_matrix(rng: Rng64, rows: int, cols: int, scale: float = 1.0) -> np.ndarray:
    return rng.normal((rows, cols), scale)



def pytest_terminal_summary(terminalreporter):
    """Echo the one-line-per-criterion acceptance results after the run."""
    import sys
    lines = []
    for name, mod in list(sys.modules.items()):
        if name.split(".")[-1] == "test_acceptance":
            lines.extend(getattr(mod, "RESULTS", []))
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

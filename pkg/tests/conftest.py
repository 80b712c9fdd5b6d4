import pytest

from fracbayes.data import GridSpec, simulate_dataset
from fracbayes.model import PriorSpec
from fracbayes.sir import SirConfig, run_sir

# Seeds used for the shared simulated-example fixture.
DATA_SEED = 20240601
SIR_SEED = 11


@pytest.fixture(scope="session")
def grid():
    return GridSpec()


@pytest.fixture(scope="session")
def example_data(grid):
    """The 31 x 11 design at alpha=0.82, sigma=0.1."""
    return simulate_dataset(grid, 0.82, 0.1, DATA_SEED)


@pytest.fixture(scope="session")
def example_fit(example_data):
    return run_sir(example_data, PriorSpec(), SirConfig(seed=SIR_SEED))


def pytest_terminal_summary(terminalreporter):
    lines = [v for key in ("passed", "failed") for rep in terminalreporter.stats.get(key, [])
             if rep.when == "call" for k, v in rep.user_properties if k == "verdict"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

import pytest

from scarce_alloc.harness.config import ExperimentConfig

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def small_config():
    """A quick experiment: 120 patients, 5 runs."""
    from scarce_alloc.population import CohortSpec, Resource

    resources = (Resource(0, "imaging", 12, 0.3), Resource(1, "bed", 7, 0.5))
    return ExperimentConfig(cohort=CohortSpec(n_patients=120, resources=resources), n_runs=5)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

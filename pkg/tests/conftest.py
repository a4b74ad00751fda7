import pytest

from delayplatoon.reference import ReferenceProfile
from delayplatoon.sim import ScenarioConfig, run_spatial

DIP = ReferenceProfile.cosine_dip(20.0, 2.0, 300.0, 500.0)


def dip_config(**kw):
    base = dict(reference=DIP, seed=1, ic_spread=(0.5, 1.0, 0.1))
    base.update(kw)
    return ScenarioConfig(**base)


@pytest.fixture(scope="session")
def dip_run():
    """Closed-loop delay-based run over the cosine dip with seeded initial errors."""
    return run_spatial(dip_config())


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.LINES:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.LINES:
            terminalreporter.write_line(line)

import numpy as np
import pytest

from swarm_alloc.world import ScenarioConfig


def scenario(dims=(5, 5, 3), ground=1, aerial=1, slots=2, **kw) -> ScenarioConfig:
    agents = []
    if ground:
        agents.append({"kind": "ground", "count": ground})
    if aerial:
        agents.append({"kind": "aerial", "count": aerial})
    return ScenarioConfig(dims=dims, agents=agents, task_slots=slots, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

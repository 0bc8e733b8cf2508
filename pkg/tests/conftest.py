import functools

import pytest

from geosnakes.edges import EdgeModelConfig, build_edge_model
from geosnakes.flows import FlowParams
from geosnakes.scheduler import ScheduleConfig, run_method
from geosnakes.synth import SyntheticSpec, generate, standard_initializations


@functools.lru_cache(maxsize=None)
def scene(kind: str):
    image, mask = generate(SyntheticSpec(kind))
    return image, mask, build_edge_model(image, EdgeModelConfig())


@functools.lru_cache(maxsize=None)
def default_run(kind: str, method: str, max_cycle: int = 3):
    """Evolution with default settings and the standard initialization, cached per session."""
    image, _, edge = scene(kind)
    return run_method(method, image, EdgeModelConfig(), FlowParams(),
                      ScheduleConfig(max_cycle=max_cycle), standard_initializations(kind), edge)


@pytest.fixture(scope="session")
def runs():
    return default_run


@pytest.fixture(scope="session")
def scenes():
    return scene


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import VERDICTS

    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[number])

import numpy as np
import pytest

from uimvdr import kernels
from uimvdr.scene import make_benchmark_scene, preset

_ACCEPTANCE_LINES = []


def record_acceptance(criterion: str, passed: bool, detail: str) -> None:
    _ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    return kernels.get_backend(request.param)


BENCHMARK_SEEDS = range(50)


@pytest.fixture(scope="session")
def benchmark_scenes():
    """The 50 seeded 4-mic scenes shared by the beamforming benchmarks."""
    geometry = preset("respeaker")
    return [make_benchmark_scene(seed, geometry) for seed in BENCHMARK_SEEDS]

import numpy as np
import pytest

from secure_dfrc.metrics import DesignState
from secure_dfrc.scenario import ArrayGeometry, ScenarioConfig, build_scenario, random_phases

SMALL = ArrayGeometry(n_tx=4, n_rx=3, irs_rows=2, irs_cols=3)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def small_scenario(seed: int, geometry: ArrayGeometry = SMALL, **kw):
    return build_scenario(np.random.default_rng((seed, 0)), ScenarioConfig(geometry=geometry, **kw))


def random_design(rng, s, power: float = 1.0) -> DesignState:
    n = s.geometry.n_tx
    w, W = crandn(rng, n), crandn(rng, n, n)
    scale = np.sqrt(power / (np.vdot(w, w).real + np.sum(np.abs(W) ** 2)))
    return DesignState(scale * w, scale * W, random_phases(rng, s.geometry.n_irs))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criterion number -> one-line outcome, printed after the run
ACCEPTANCE: dict[int, str] = {}


def report(criterion: int, ok: bool, detail: str) -> None:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])

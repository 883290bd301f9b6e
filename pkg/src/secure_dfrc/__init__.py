"""Secrecy-rate maximization for an IRS-assisted dual-function radar-communication link."""
from .metrics import DesignState
from .optimizer import RunConfig, RunResult, Termination, run
from .scenario import ArrayGeometry, Scenario, ScenarioConfig, build_scenario

__all__ = [
    "ArrayGeometry",
    "DesignState",
    "RunConfig",
    "RunResult",
    "Scenario",
    "ScenarioConfig",
    "Termination",
    "build_scenario",
    "run",
]
__version__ = "0.1.0"

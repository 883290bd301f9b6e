"""Monte-Carlo harness: convergence bands, omega sweeps and single runs.

Trial ``i`` of a batch uses seed ``seed_base + i`` for both the channel draw
and the initial phases, so every omega value of a sweep sees the same
channels (paired comparison).  Rows are always emitted in trial/grid order,
whatever order the worker processes finish in.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .optimizer import InitializationInfeasible, RunConfig, RunResult, is_feasible, run
from .scenario import Scenario, ScenarioConfig, build_scenario

KINDS = ("convergence", "omega_sweep", "single_run")


def default_omega_grid() -> tuple[float, ...]:
    return tuple(round(0.1 + 0.05 * i, 10) for i in range(19))


class NoFeasibleTrials(RuntimeError):
    """Every trial of a batch failed to find a feasible start."""


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    n_trials: int = 30
    seed_base: int = 0
    omega_grid: tuple[float, ...] = field(default_factory=default_omega_grid)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    run: RunConfig = field(default_factory=RunConfig)
    workers: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.kind == "omega_sweep":
            if not self.omega_grid:
                raise ValueError("omega grid is empty")
            if any(not 0.0 <= w <= 1.0 for w in self.omega_grid):
                raise ValueError("omega grid values must lie in [0, 1]")


@dataclass(frozen=True)
class TrialOutcome:
    """Summary of one run; ``error`` is set (and the rest empty) if it never started."""

    seed: int
    omega: float | None
    secrecy_trace: tuple[float, ...] = ()
    user_rate: float = math.nan
    ed_rate: float = math.nan
    termination: str = ""
    feasible: bool = False
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error

    @property
    def secrecy_rate(self) -> float:
        return self.secrecy_trace[-1] if self.secrecy_trace else math.nan


def trial_scenario(seed: int, config: ScenarioConfig) -> Scenario:
    return build_scenario(np.random.default_rng((seed, 0)), config)


def _summarize(seed: int, omega: float | None, res: RunResult, s: Scenario) -> TrialOutcome:
    last = res.final_record
    return TrialOutcome(
        seed=seed, omega=omega,
        secrecy_trace=tuple(r.secrecy_rate for r in res.trace),
        user_rate=last.user_rate, ed_rate=last.ed_rate,
        termination=res.termination.value,
        feasible=is_feasible(res.final, s, res.config),
    )


def run_trial(task: tuple[int, float | None, ScenarioConfig, RunConfig]) -> TrialOutcome:
    seed, omega, scfg, rcfg = task
    s = trial_scenario(seed, scfg)
    cfg = replace(rcfg, seed=seed, omega=omega)
    try:
        res = run(s, cfg)
    except InitializationInfeasible as err:
        return TrialOutcome(seed, omega, error=f"InitializationInfeasible: {err}")
    return _summarize(seed, omega, res, s)


def _map(tasks: list, workers: int) -> list[TrialOutcome]:
    if workers == 1 or len(tasks) == 1:
        return [run_trial(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(run_trial, tasks))


def _seeds(spec: ExperimentSpec) -> range:
    return range(spec.seed_base, spec.seed_base + spec.n_trials)


def _fmt(x: float) -> str:
    return repr(float(x))


# -- convergence -------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceRow:
    t: int
    mean_secrecy: float
    var_secrecy: float
    n_active: int


@dataclass
class ConvergenceTable:
    rows: list[ConvergenceRow]
    trials: list[TrialOutcome]

    @property
    def n_failed(self) -> int:
        return sum(not o.ok for o in self.trials)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["t", "mean_secrecy", "var_secrecy", "n_active"])
        for r in self.rows:
            wr.writerow([r.t, _fmt(r.mean_secrecy), _fmt(r.var_secrecy), r.n_active])
        return buf.getvalue()


def convergence_table(trials: list[TrialOutcome]) -> list[ConvergenceRow]:
    """Per-iteration mean and population variance over the feasible trials.

    A trial that stopped early contributes its final value to later rows
    (carried forward) but is no longer counted in ``n_active``.
    """
    traces = [o.secrecy_trace for o in trials if o.ok]
    if not traces:
        return []
    length = max(len(tr) for tr in traces)
    rows = []
    for t in range(length):
        vals = np.array([tr[min(t, len(tr) - 1)] for tr in traces])
        active = sum(len(tr) > t for tr in traces)
        rows.append(ConvergenceRow(t, float(vals.mean()), float(vals.var()), active))
    return rows


def run_convergence(spec: ExperimentSpec) -> ConvergenceTable:
    if spec.kind != "convergence":
        raise ValueError("spec.kind must be 'convergence'")
    tasks = [(seed, spec.run.omega, spec.scenario, spec.run) for seed in _seeds(spec)]
    trials = _map(tasks, spec.workers)
    if not any(o.ok for o in trials):
        raise NoFeasibleTrials(f"all {len(trials)} trials failed to initialize")
    return ConvergenceTable(convergence_table(trials), trials)


# -- omega sweep -------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    omega: float
    mean_Ru: float
    mean_Rte: float
    mean_secrecy: float
    stderr_secrecy: float
    n_ok: int


@dataclass
class SweepTable:
    rows: list[SweepRow]
    trials: dict[float, list[TrialOutcome]]

    def secrecy_matrix(self) -> np.ndarray:
        """(n_omega, n_trials) secrecy rates, NaN where a trial failed."""
        return np.array([[o.secrecy_rate if o.ok else math.nan for o in self.trials[r.omega]]
                         for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["omega", "mean_Ru", "mean_Rte", "mean_secrecy", "stderr_secrecy"])
        for r in self.rows:
            wr.writerow([_fmt(r.omega), _fmt(r.mean_Ru), _fmt(r.mean_Rte),
                         _fmt(r.mean_secrecy), _fmt(r.stderr_secrecy)])
        return buf.getvalue()


def stderr(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    return float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0


def sweep_row(omega: float, trials: list[TrialOutcome]) -> SweepRow:
    ok = [o for o in trials if o.ok]
    if not ok:
        return SweepRow(omega, math.nan, math.nan, math.nan, math.nan, 0)
    sec = np.array([o.secrecy_rate for o in ok])
    return SweepRow(omega, float(np.mean([o.user_rate for o in ok])),
                    float(np.mean([o.ed_rate for o in ok])), float(sec.mean()), stderr(sec), len(ok))


def run_omega_sweep(spec: ExperimentSpec) -> SweepTable:
    if spec.kind != "omega_sweep":
        raise ValueError("spec.kind must be 'omega_sweep'")
    seeds = list(_seeds(spec))
    tasks = [(seed, om, spec.scenario, spec.run) for om in spec.omega_grid for seed in seeds]
    flat = _map(tasks, spec.workers)
    if not any(o.ok for o in flat):
        raise NoFeasibleTrials(f"all {len(flat)} trials failed to initialize")
    n = len(seeds)
    by_omega = {om: flat[i * n:(i + 1) * n] for i, om in enumerate(spec.omega_grid)}
    return SweepTable([sweep_row(om, by_omega[om]) for om in spec.omega_grid], by_omega)


def run_single(spec: ExperimentSpec) -> RunResult:
    """One full run for seed ``seed_base`` (the trace keeps every record)."""
    s = trial_scenario(spec.seed_base, spec.scenario)
    return run(s, replace(spec.run, seed=spec.seed_base))

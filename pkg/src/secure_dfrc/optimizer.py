"""Alternating secrecy-rate maximization.

Each outer iteration refreshes the quadratic-transform auxiliaries, solves
the lifted precoder program, then the relaxed phase program.  Both solves
are followed by a guarded search on the true secrecy rate, so an accepted
iterate never lowers it and always satisfies the power and radar limits.
"""
from __future__ import annotations

import csv
import enum
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import sdp
from .beamformer import Subproblem1Data, build_subproblem1, psd_sqrt, solve_subproblem1
from .fractional import AuxiliaryState, scenario_constants, update_auxiliaries
from .irs_design import (
    RepairFailed,
    build_phi_objective,
    build_snr_surrogate,
    build_subproblem2,
    extract_phases,
    solve_subproblem2,
)
from .metrics import DesignState, ed_rate, radar_snr, user_rate
from .scenario import (
    Scenario,
    db_to_lin,
    dbm_to_watt,
    effective_user_channel,
    radar_cascade_channel,
    random_phases,
)

MONOTONE_GUARD = 1e-5
FEAS_TOL = 1e-6


class InitializationInfeasible(RuntimeError):
    pass


class MonotonicityViolation(RuntimeError):
    pass


class Termination(enum.Enum):
    CONVERGED = "Converged"
    ITER_CAP = "IterCap"
    STALLED = "Stalled"


@dataclass(frozen=True)
class RunConfig:
    p_r: float = dbm_to_watt(30.0)
    gamma_th: float = db_to_lin(-11.0)
    epsilon: float = db_to_lin(-20.0)
    t_max: int = 20
    omega: float | None = None
    seed: int = 0
    solver_tol: float = 1e-7
    max_redraws: int = 50
    search_steps: int = 20
    # Refresh the auxiliaries again between the two sub-problems.  Off by
    # default: the reference loop refreshes once per outer iteration.
    refresh_aux_before_phi: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if not self.p_r > 0:
            raise ValueError("p_r must be positive")
        if self.gamma_th < 0:
            raise ValueError("gamma_th must be nonnegative")
        if self.omega is not None and not 0.0 <= self.omega <= 1.0:
            raise ValueError("omega must lie in [0, 1]")


@dataclass(frozen=True)
class SolveStats:
    status: str
    iterations: int
    seconds: float
    verified: bool
    step: float  # accepted search weight; 0 when the old point was kept


@dataclass(frozen=True)
class StateMetrics:
    secrecy_rate: float
    user_rate: float
    ed_rate: float
    radar_snr: float
    power_used: float


@dataclass(frozen=True)
class IterationRecord:
    t: int
    secrecy_rate: float
    user_rate: float
    ed_rate: float
    radar_snr: float
    power_used: float
    aux: AuxiliaryState | None = None
    sp1: SolveStats | None = None
    sp2: SolveStats | None = None
    phi_accepted: bool = True


@dataclass
class RunResult:
    trace: list[IterationRecord]
    final: DesignState
    termination: Termination
    config: RunConfig = field(default_factory=RunConfig)

    @property
    def final_record(self) -> IterationRecord:
        return self.trace[-1]

    @property
    def iterations(self) -> int:
        return self.trace[-1].t

    def trace_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["t", "secrecy_rate", "user_rate", "ed_rate", "radar_snr", "power_used", "term_reason"])
        for i, r in enumerate(self.trace):
            reason = self.termination.value if i == len(self.trace) - 1 else ""
            wr.writerow([r.t, repr(r.secrecy_rate), repr(r.user_rate), repr(r.ed_rate),
                         repr(r.radar_snr), repr(r.power_used), reason])
        return buf.getvalue()


def evaluate_state(d: DesignState, s: Scenario) -> StateMetrics:
    ru, rte = user_rate(d, s), ed_rate(d, s)
    return StateMetrics(ru - rte, ru, rte, radar_snr(d, s), d.power)


def _record(t, d, s, **extra) -> IterationRecord:
    m = evaluate_state(d, s)
    return IterationRecord(t, m.secrecy_rate, m.user_rate, m.ed_rate, m.radar_snr, m.power_used, **extra)


def is_feasible(d: DesignState, s: Scenario, cfg: RunConfig) -> bool:
    return d.power <= cfg.p_r * (1 + FEAS_TOL) and radar_snr(d, s) >= cfg.gamma_th * (1 - FEAS_TOL)


def initial_state(s: Scenario, cfg: RunConfig, rng: np.random.Generator | None = None) -> DesignState:
    """Random phases, matched-filter ``w`` and isotropic AN.

    Without an omega split the whole budget goes to ``w``.  Phases are
    re-drawn until the radar threshold holds.
    """
    rng = rng if rng is not None else np.random.default_rng((cfg.seed, 1))
    om = 1.0 if cfg.omega is None else cfg.omega
    n = s.geometry.n_tx
    W_n = np.sqrt((1 - om) * cfg.p_r / n) * np.eye(n)
    for _ in range(cfg.max_redraws):
        phi = random_phases(rng, s.geometry.n_irs)
        c_u = effective_user_channel(phi, s)
        w = c_u.conj() / np.linalg.norm(c_u) * np.sqrt(om * cfg.p_r)
        d = DesignState(w, W_n, phi)
        if radar_snr(d, s) >= cfg.gamma_th:
            return d
    raise InitializationInfeasible(f"no radar-feasible start in {cfg.max_redraws} draws")


def precoder_search(d: DesignState, s: Scenario, cfg: RunConfig, w1: np.ndarray,
                    R_w1: np.ndarray, R_n1: np.ndarray) -> tuple[DesignState, float]:
    """Move along the segment from the current lifted point to the solver's.

    At weight t the lifted point is ``(w_t, R_w,t, R_n,t)``; the slack
    ``R_w,t - w_t w_t^H`` is folded into the AN covariance (capped by the AN
    budget when an omega split is set), which keeps the total covariance,
    hence power and radar SNR, equal to the lifted one.  Returns the best
    feasible improving candidate, or ``d`` with weight 0.
    """
    w0 = d.w
    R_w0 = np.outer(w0, w0.conj())
    R_n0 = d.W_n @ d.W_n.conj().T
    base = evaluate_state(d, s).secrecy_rate
    best, best_val, best_t = d, base, 0.0
    t = 1.0
    for _ in range(cfg.search_steps):
        w_t = (1 - t) * w0 + t * w1
        R_wt = (1 - t) * R_w0 + t * R_w1
        R_nt = (1 - t) * R_n0 + t * R_n1
        slack = R_wt - np.outer(w_t, w_t.conj())
        slack_tr = float(np.real(np.trace(slack)))
        if cfg.omega is None or slack_tr <= 0:
            frac = 1.0
        else:
            room = (1 - cfg.omega) * cfg.p_r - float(np.real(np.trace(R_nt)))
            frac = min(1.0, max(0.0, room / slack_tr))
        cand = DesignState(w_t, psd_sqrt(R_nt + frac * slack, atol=1e-6 * cfg.p_r), d.phi)
        if is_feasible(cand, s, cfg):
            val = evaluate_state(cand, s).secrecy_rate
            if val > best_val:
                best, best_val, best_t = cand, val, t
        t *= 0.5
    return best, best_t


def _verified(sol, problem) -> bool:
    return sdp.verify(sol, problem, tol=1e-6).ok


def _precoder_step(d, s, cfg, aux) -> tuple[DesignState, SolveStats]:
    k = scenario_constants(aux, d.phi, s)
    data = Subproblem1Data(k.v, k.M, radar_cascade_channel(d.phi, s), cfg.p_r, cfg.gamma_th,
                           s.sigma2_r, cfg.omega)
    problem = build_subproblem1(data)
    t0 = time.perf_counter()
    try:
        res = solve_subproblem1(problem, tol=cfg.solver_tol)
    except sdp.SdpError as err:
        sol = err.solution
        return d, SolveStats(sol.status.value if sol else "error", sol.iterations if sol else 0,
                             time.perf_counter() - t0, False, 0.0)
    secs = time.perf_counter() - t0
    new, step = precoder_search(d, s, cfg, res.w, res.R_w, res.R_Wn)
    return new, SolveStats(res.solution.status.value, res.solution.iterations, secs,
                           _verified(res.solution, problem), step)


def _phase_step(d, s, cfg, aux) -> tuple[DesignState, SolveStats, bool, bool]:
    """Returns ``(design, stats, phi_accepted, failed)``.

    ``failed`` marks a step where no radar-feasible phase candidate existed
    (or the relaxed program itself could not be solved).
    """
    obj = build_phi_objective(d, aux, s)
    sur = build_snr_surrogate(d.phi, d, s, cfg.gamma_th)
    problem = build_subproblem2(obj, sur)
    t0 = time.perf_counter()
    try:
        sol = solve_subproblem2(problem, tol=cfg.solver_tol)
    except sdp.SdpError as err:
        sol = err.solution
        return d, SolveStats(sol.status.value if sol else "error", sol.iterations if sol else 0,
                             time.perf_counter() - t0, False, 0.0), False, True
    secs = time.perf_counter() - t0
    ok = _verified(sol, problem)
    try:
        upd = extract_phases(sol, problem, d, s, cfg.gamma_th, cfg.search_steps)
    except RepairFailed:
        return d, SolveStats(sol.status.value, sol.iterations, secs, ok, 0.0), False, True
    stats = SolveStats(sol.status.value, sol.iterations, secs, ok, upd.step)
    return d.with_(phi=upd.phi), stats, upd.accepted, False


def run(s: Scenario, cfg: RunConfig, init: DesignState | None = None) -> RunResult:
    """Run the alternating loop from ``init`` (or :func:`initial_state`)."""
    d = init if init is not None else initial_state(s, cfg)
    trace = [_record(0, d, s)]
    prev = trace[0].secrecy_rate
    failures = 0
    termination = Termination.ITER_CAP
    for t in range(1, cfg.t_max + 1):
        aux = update_auxiliaries(d, s)
        d, st1 = _precoder_step(d, s, cfg, aux)
        aux2 = update_auxiliaries(d, s) if cfg.refresh_aux_before_phi else aux
        d, st2, accepted, failed = _phase_step(d, s, cfg, aux2)
        rec = _record(t, d, s, aux=aux, sp1=st1, sp2=st2, phi_accepted=accepted)
        trace.append(rec)
        if rec.secrecy_rate < prev - MONOTONE_GUARD:
            raise MonotonicityViolation(f"secrecy rate fell from {prev} to {rec.secrecy_rate} at t={t}")
        failures = failures + 1 if failed else 0
        cur = rec.secrecy_rate
        change = abs(cur - prev) / abs(prev) if prev != 0 else (0.0 if cur == prev else math.inf)
        prev = cur
        if change <= cfg.epsilon:
            termination = Termination.CONVERGED
            break
        if failures >= 2:
            termination = Termination.STALLED
            break
    return RunResult(trace, d, termination, cfg)

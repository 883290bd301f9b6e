"""Sub-problem 2: the IRS phase update for a fixed precoder pair.

The transformed secrecy objective is a Hermitian quadratic in ``phi``.  The
radar SNR is quartic in ``phi``; it is replaced by its tangent minorant at the
current phases, which is quadratic.  Both are lifted to one real PSD block
over ``x = [Re phi; Im phi; 1]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import sdp
from .fractional import AuxiliaryState
from .metrics import DesignState, radar_snr, secrecy_rate
from .scenario import Scenario, ed_factor, user_factor
from .sdp import SdpProblem, SdpSolution, VarView


class RepairFailed(RuntimeError):
    """No unit-modulus candidate meets the radar SNR threshold."""


@dataclass(frozen=True, eq=False)
class PhiObjective:
    """``const_term + Re(phi^T lin) + phi^T Q conj(phi)`` with Hermitian ``Q``."""

    Q: np.ndarray
    lin: np.ndarray
    const_term: float

    def value(self, phi: np.ndarray) -> float:
        quad = phi @ self.Q @ phi.conj()
        return self.const_term + float(np.real(phi @ self.lin)) + float(np.real(quad))


@dataclass(frozen=True, eq=False)
class SnrSurrogate:
    """``phi^H L2 conj(phi) + phi^T L3 phi - offset``, tangent to the radar SNR."""

    L2: np.ndarray
    L3: np.ndarray
    offset: float
    gamma_th_shifted: float

    def pair(self, phi: np.ndarray) -> complex:
        return phi.conj() @ self.L2 @ phi.conj() + phi @ self.L3 @ phi

    def value(self, phi: np.ndarray) -> float:
        z = self.pair(phi)
        assert abs(z.imag) <= 1e-8 * max(1.0, abs(z.real)), "surrogate pair is not real"
        return float(z.real) - self.offset


def _covariance(d: DesignState) -> np.ndarray:
    return np.outer(d.w, d.w.conj()) + d.W_n @ d.W_n.conj().T


def build_phi_objective(d: DesignState, aux: AuxiliaryState, s: Scenario) -> PhiObjective:
    """Expand the transformed objective around ``c_u = g + D^T phi``, ``c_te = E^T phi``."""
    D, E = user_factor(s), ed_factor(s)
    R = _covariance(d)
    ku = aux.alpha_u * np.sqrt(1 + aux.gamma_u) * aux.phase_u
    kt = aux.alpha_te * np.sqrt(1 + aux.gamma_te) * aux.phase_te
    au2, at2 = aux.alpha_u ** 2, aux.alpha_te ** 2

    Q = at2 * E @ R @ E.conj().T - au2 * D @ R @ D.conj().T
    Q = 0.5 * (Q + Q.conj().T)
    lin = 2 * ku * (D @ d.w) - 2 * kt * (E @ d.w) - 2 * au2 * (D @ R @ s.g.conj())
    const = (
        np.log1p(aux.gamma_u) - aux.gamma_u - np.log1p(aux.gamma_te) + aux.gamma_te
        + at2 * s.sigma2_te - au2 * s.sigma2_u
        + 2 * np.real(ku * (s.g @ d.w)) - au2 * np.real(s.g @ R @ s.g.conj())
    )
    return PhiObjective(Q, lin, float(const))


def _radar_factors(d: DesignState, s: Scenario) -> tuple[np.ndarray, np.ndarray]:
    A = s.H_ul.conj().T @ s.H_ul
    B = s.H_dl @ _covariance(d) @ s.H_dl.conj().T
    return A, B


def vectorized_snr_matrix(d: DesignState, s: Scenario):
    """``Z = B^T kron A`` and a builder ``phi -> vec(Phi a a^T Phi)``.

    With these, the radar SNR is ``|beta|^2 / sigma_R^2 * u^H Z u``.
    ``vec`` stacks columns.
    """
    A, B = _radar_factors(d, s)
    Z = np.kron(B.T, A)
    a = s.a_irs

    def u_builder(phi: np.ndarray) -> np.ndarray:
        p = phi * a
        return np.outer(p, p).ravel(order="F")

    return Z, u_builder


def build_snr_surrogate(phi_t: np.ndarray, d: DesignState, s: Scenario,
                        gamma_th: float = 0.0) -> SnrSurrogate:
    """Tangent minorant of the radar SNR at ``phi_t``.

    With ``V = A U_t B`` one has ``u_t^H Z u = phi^T ((a a^T) o conj(V)) phi``,
    so ``L3 = c (a a^T) o conj(V)`` and ``L2 = conj(L3)`` make the pair sum
    exactly ``2 Re(phi^T L3 phi)``.
    """
    A, B = _radar_factors(d, s)
    a = s.a_irs
    p_t = phi_t * a
    U_t = np.outer(p_t, p_t)
    V = A @ U_t @ B
    c = abs(s.beta) ** 2 / s.sigma2_r
    L3 = c * np.outer(a, a) * V.conj()
    L3 = 0.5 * (L3 + L3.T)  # only the symmetric part acts on phi^T L3 phi
    offset = c * float(np.real(np.sum(U_t.conj() * V)))
    return SnrSurrogate(L3.conj(), L3, offset, gamma_th + offset)


# -- lifted program -----------------------------------------------------------

def _real_hermitian_form(H: np.ndarray) -> np.ndarray:
    """``phi^H H phi = x^T K x`` for ``x = [Re phi; Im phi]``."""
    return np.block([[H.real, -H.imag], [H.imag, H.real]])


def _real_symmetric_form(S: np.ndarray) -> np.ndarray:
    """``Re(phi^T S phi) = x^T K x`` for complex symmetric ``S``."""
    S = 0.5 * (S + S.T)
    return np.block([[S.real, -S.imag], [-S.imag, -S.real]])


def _lift(K: np.ndarray | None, k: np.ndarray | None, n: int) -> np.ndarray:
    """Coefficient of ``x^T K x + k^T x`` on the ``[[x x^T, x], [x^T, 1]]`` block."""
    out = np.zeros((n + 1, n + 1))
    if K is not None:
        out[:n, :n] = 0.5 * (K + K.T)
    if k is not None:
        out[:n, n] = 0.5 * k
        out[n, :n] = 0.5 * k
    return out


def build_subproblem2(obj: PhiObjective, sur: SnrSurrogate,
                      explicit_r2_bound: bool = False) -> SdpProblem:
    """Relaxed phase program over one real block of order ``2N + 1``.

    The block is ``X ~ [[x x^T, x], [x^T, 1]]`` with ``x = [Re phi; Im phi]``;
    the complex views are ``R1 = phi phi^H`` and ``R2 = phi phi^T``.  Unit
    diagonal of ``R1`` is a linear row per element.  ``|[R2]_nn| <= 1``
    follows from PSD plus that row, so it is only added (as 2x2 blocks)
    when ``explicit_r2_bound`` is set.
    """
    N = obj.Q.shape[0]
    n = 2 * N
    # phi^T Q conj(phi) = phi^H conj(Q) phi for Hermitian Q
    K_obj = _real_hermitian_form(obj.Q.conj())
    k_obj = np.concatenate([obj.lin.real, -obj.lin.imag])
    blocks = [n + 1]
    prob = SdpProblem(blocks, {0: _lift(K_obj, k_obj, n)}, offset=obj.const_term)
    prob.var_map["x"] = VarView(0, "real", (0, n), (n, n + 1), vector=True)
    prob.var_map["X"] = VarView(0, "real", (0, n), (0, n))

    for i in range(N):
        E = np.zeros((n + 1, n + 1))
        E[i, i] = E[N + i, N + i] = 1.0
        prob.add({0: E}, "=", 1.0, f"unit_{i}")
    corner = np.zeros((n + 1, n + 1))
    corner[n, n] = 1.0
    prob.add({0: corner}, "=", 1.0, "corner")

    K_snr = 2.0 * _real_symmetric_form(sur.L3)
    if np.any(K_snr) or sur.gamma_th_shifted > 0:
        prob.add({0: _lift(K_snr, None, n)}, ">=", sur.gamma_th_shifted, "radar_snr")

    if explicit_r2_bound:
        # [[1 + Re z, Im z], [Im z, 1 - Re z]] PSD  <=>  |z| <= 1,
        # with z = X_rr - X_ii + 2j X_ri.
        for i in range(N):
            k = len(prob.blocks)
            prob.blocks.append(2)
            r, m = i, N + i
            Re = np.zeros((n + 1, n + 1))
            Re[r, r], Re[m, m] = 1.0, -1.0
            Im = np.zeros((n + 1, n + 1))
            Im[r, m] = Im[m, r] = 1.0
            e00, e11, e01 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0]), np.array([[0, 0.5], [0.5, 0]])
            prob.add({k: e00, 0: -Re}, "=", 1.0, f"r2re_{i}")
            prob.add({k: e11, 0: Re}, "=", 1.0, f"r2re2_{i}")
            prob.add({k: e01, 0: -Im}, "=", 0.0, f"r2im_{i}")
    prob.validate()
    return prob


def relaxed_views(X: np.ndarray, N: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(phi, R1, R2)`` read off the real block."""
    x = X[:2 * N, 2 * N]
    phi = x[:N] + 1j * x[N:]
    rr, ii = X[:N, :N], X[N:2 * N, N:2 * N]
    ri, ir = X[:N, N:2 * N], X[N:2 * N, :N]  # (real rows, imag cols), (imag rows, real cols)
    R1 = rr + ii + 1j * (ir - ri)
    R2 = rr - ii + 1j * (ir + ri)
    return phi, R1, R2


def solve_subproblem2(p: SdpProblem, solver: Callable[..., SdpSolution] | None = None,
                      tol: float = 1e-7) -> SdpSolution:
    solver = solver or sdp.solve
    sol = solver(p, tol=tol)
    if sol.status is sdp.Status.INFEASIBLE:
        raise sdp.Infeasible(f"sub-problem 2 infeasible ({sol.certificate} certificate)", sol)
    if sol.status is not sdp.Status.OPTIMAL:
        raise sdp.SlowProgress("sub-problem 2 did not converge", sol)
    return sol


def project_unit_modulus(phi: np.ndarray) -> np.ndarray:
    """Entrywise ``phi / |phi|``; zero entries map to 1."""
    phi = np.asarray(phi, dtype=complex)
    mag = np.abs(phi)
    out = np.ones_like(phi)
    nz = mag > 0
    out[nz] = phi[nz] / mag[nz]
    return out


@dataclass(frozen=True, eq=False)
class PhaseUpdate:
    phi: np.ndarray
    step: float       # interpolation weight of the accepted candidate, 0 if retained
    secrecy: float

    @property
    def accepted(self) -> bool:
        return self.step > 0


def relaxed_phases(solution: SdpSolution, problem: SdpProblem) -> np.ndarray:
    x = problem.extract(solution.X, "x")
    N = x.size // 2
    return x[:N] + 1j * x[N:]


def extract_phases(solution: SdpSolution, problem: SdpProblem, d: DesignState, s: Scenario,
                   gamma_th: float, steps: int = 20) -> PhaseUpdate:
    """Project the relaxed phases and run the guarded repair search.

    Candidates rotate every phase of ``d.phi`` towards the projection by a
    fraction ``t = 1, 1/2, 1/4, ...``.  Among the candidates meeting the radar
    threshold, the best one that beats the current secrecy rate is returned.
    If some are feasible but none improves, ``d.phi`` is returned with step 0.
    If none is feasible, :class:`RepairFailed` is raised.
    """
    phi_hat = project_unit_modulus(relaxed_phases(solution, problem))
    return guarded_phase_search(phi_hat, d, s, gamma_th, steps)


def guarded_phase_search(phi_hat: np.ndarray, d: DesignState, s: Scenario, gamma_th: float,
                         steps: int = 20) -> PhaseUpdate:
    base = secrecy_rate(d, s)
    delta = np.angle(phi_hat / d.phi)
    best = PhaseUpdate(d.phi, 0.0, base)
    any_feasible = False
    t = 1.0
    for _ in range(steps):
        cand = d.with_(phi=d.phi * np.exp(1j * t * delta))
        if radar_snr(cand, s) >= gamma_th * (1 - 1e-6):
            any_feasible = True
            val = secrecy_rate(cand, s)
            if val > best.secrecy:
                best = PhaseUpdate(cand.phi, t, val)
        t *= 0.5
    if not any_feasible:
        raise RepairFailed("no candidate meets the radar SNR threshold")
    return best

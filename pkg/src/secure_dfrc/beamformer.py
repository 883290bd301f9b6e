"""Sub-problem 1: the lifted (w, R_w, R_Wn) program for fixed IRS phases."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import sdp
from .sdp import HermitianConstraint, SdpProblem, SdpSolution, VarView


class NotPSD(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Subproblem1Data:
    v: np.ndarray
    M: np.ndarray
    C_T: np.ndarray
    p_r: float
    gamma_th: float
    sigma2_r: float
    omega: float | None = None

    def __post_init__(self):
        if not self.p_r > 0:
            raise ValueError("power budget must be positive")
        if self.gamma_th < 0:
            raise ValueError("SNR threshold must be nonnegative")
        if not self.sigma2_r > 0:
            raise ValueError("radar noise power must be positive")
        if self.omega is not None and not 0.0 <= self.omega <= 1.0:
            raise ValueError("omega must lie in [0, 1]")
        n = self.v.shape[0]
        if self.M.shape != (n, n) or self.C_T.shape[1] != n:
            raise ValueError("inconsistent dimensions")

    @property
    def n_tx(self) -> int:
        return self.v.shape[0]

    @property
    def radar_gram(self) -> np.ndarray:
        """``C_T^H C_T / sigma_R^2``, so that the SNR is ``tr(G R)``."""
        G = self.C_T.conj().T @ self.C_T / self.sigma2_r
        return 0.5 * (G + G.conj().T)


class Subproblem1Result(NamedTuple):
    w: np.ndarray
    R_Wn: np.ndarray
    R_w: np.ndarray
    solution: SdpSolution


def _pad(A: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    out = np.zeros((n + 1, n + 1), dtype=complex)
    out[:n, :n] = A
    return out


def build_subproblem1(data: Subproblem1Data) -> SdpProblem:
    """Blocks: the Schur block ``[[R_w, w], [w^H, 1]]`` and ``R_Wn``, both Hermitian."""
    n = data.n_tx
    M = 0.5 * (data.M + data.M.conj().T)
    lin = np.zeros((n + 1, n + 1), dtype=complex)
    lin[n, :n] = 0.5 * data.v          # tr(lin X) = Re(v^T w)
    lin[:n, n] = 0.5 * data.v.conj()
    objective = {0: _pad(M) + lin, 1: M}

    corner = np.zeros((n + 1, n + 1))
    corner[n, n] = 1.0
    eye = np.eye(n)
    G = data.radar_gram
    cons = [
        HermitianConstraint({0: corner}, "=", 1.0, "corner"),
        HermitianConstraint({0: _pad(eye), 1: eye}, "<=", data.p_r, "power"),
        HermitianConstraint({0: _pad(G), 1: G}, ">=", data.gamma_th, "radar_snr"),
    ]
    if data.omega is not None:
        cons += [
            HermitianConstraint({0: _pad(eye)}, "<=", data.omega * data.p_r, "info_cap"),
            HermitianConstraint({1: eye}, "<=", (1.0 - data.omega) * data.p_r, "an_cap"),
        ]
    var_map = {
        "R_w": VarView(0, "hermitian", (0, n), (0, n)),
        "w": VarView(0, "hermitian", (0, n), (n, n + 1), vector=True),
        "R_Wn": VarView(1, "hermitian", (0, n), (0, n)),
    }
    return sdp.realify([(n + 1, True), (n, True)], objective, cons, var_map)


def solve_subproblem1(p: SdpProblem, solver: Callable[..., SdpSolution] | None = None,
                      tol: float = 1e-7) -> Subproblem1Result:
    """Solve and unpack; raises :class:`sdp.Infeasible` or :class:`sdp.SlowProgress`."""
    solver = solver or sdp.solve
    sol = solver(p, tol=tol)
    if sol.status is sdp.Status.INFEASIBLE:
        raise sdp.Infeasible(f"sub-problem 1 infeasible ({sol.certificate} certificate)", sol)
    if sol.status is not sdp.Status.OPTIMAL:
        raise sdp.SlowProgress("sub-problem 1 did not converge", sol)
    w = p.extract(sol.X, "w")
    R_w = p.extract(sol.X, "R_w")
    R_Wn = p.extract(sol.X, "R_Wn")
    return Subproblem1Result(w, R_Wn, R_w, sol)


def max_radar_snr(data: Subproblem1Data) -> float:
    """Largest SNR any covariance with trace ``p_r`` can reach."""
    return data.p_r * float(np.linalg.eigvalsh(data.radar_gram)[-1])


def psd_sqrt(R: np.ndarray, atol: float = 0.0) -> np.ndarray:
    """Principal square root of a Hermitian PSD matrix.

    Eigenvalues above ``-max(1e-6 ||R||, atol)`` are clipped to zero; anything
    more negative raises :class:`NotPSD`.  ``atol`` lets callers that know the
    natural scale (e.g. a power budget) accept dust on a nearly-zero matrix.
    """
    R = np.asarray(R)
    H = 0.5 * (R + R.conj().T)
    lam, V = np.linalg.eigh(H)
    scale = float(np.abs(lam).max(initial=0.0))
    if lam.size and lam[0] < -max(1e-6 * scale, atol):
        raise NotPSD(f"matrix has eigenvalue {lam[0]:.3e}")
    lam = np.clip(lam, 0.0, None)
    return (V * np.sqrt(lam)) @ V.conj().T

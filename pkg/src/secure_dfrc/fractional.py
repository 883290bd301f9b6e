"""Quadratic-transform rewrite of the secrecy rate.

For fixed auxiliaries the secrecy rate becomes

    c + Re(v^T w) + tr(M (W_n W_n^H + w w^H))

which is affine in the lifted variables ``(w, w w^H, W_n W_n^H)``.  At the
auxiliaries returned by :func:`update_auxiliaries` the rewrite is exact and
has the same gradient as the secrecy rate, so it is the first-order model
that sub-problem 1 maximizes.

Note that only the user-rate half is a lower bound for every choice of
auxiliaries.  The eavesdropper half enters with a minus sign, so fixing its
auxiliaries bounds ``-R_te`` from above, not from below.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import DesignState
from .scenario import Scenario, effective_ed_channel, effective_user_channel


@dataclass(frozen=True)
class AuxiliaryState:
    alpha_u: float = 0.0
    gamma_u: float = 0.0
    alpha_te: float = 0.0
    gamma_te: float = 0.0
    # Unit-modulus rotations that make c^T w real and nonnegative.  With both
    # left at 1 the expressions reduce to the real-auxiliary textbook form.
    phase_u: complex = 1.0
    phase_te: complex = 1.0

    def __post_init__(self):
        for name in ("alpha_u", "gamma_u", "alpha_te", "gamma_te"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def as_dict(self) -> dict:
        return {
            "alpha_u": self.alpha_u, "gamma_u": self.gamma_u,
            "alpha_te": self.alpha_te, "gamma_te": self.gamma_te,
        }


@dataclass(frozen=True, eq=False)
class TransformConstants:
    c: float
    v: np.ndarray
    M: np.ndarray  # Hermitian


def _link_aux(c: np.ndarray, d: DesignState, noise: float) -> tuple[float, float, complex]:
    z = c @ d.w
    signal = abs(z) ** 2
    interference = float(np.sum(np.abs(c @ d.W_n) ** 2))
    gamma = signal / (interference + noise)
    alpha = np.sqrt(1 + gamma) * abs(z) / (signal + interference + noise)
    phase = np.exp(-1j * np.angle(z)) if abs(z) > 0 else 1.0 + 0j
    return float(alpha), float(gamma), complex(phase)


def update_auxiliaries(d: DesignState, s: Scenario) -> AuxiliaryState:
    """Closed-form maximizers of the transform for the current design."""
    au, gu, pu = _link_aux(effective_user_channel(d.phi, s), d, s.sigma2_u)
    at, gt, pt = _link_aux(effective_ed_channel(d.phi, s), d, s.sigma2_te)
    return AuxiliaryState(au, gu, at, gt, pu, pt)


def transform_constants(aux: AuxiliaryState, c_u: np.ndarray, c_te: np.ndarray,
                        sigma2_u: float = 0.0, sigma2_te: float = 0.0) -> TransformConstants:
    """Build ``(c, v, M)``.

    ``M`` is stored as ``alpha_te^2 conj(c_te c_te^H) - alpha_u^2 conj(c_u c_u^H)``,
    the Hermitian matrix with ``w^H M w = alpha_te^2 |c_te^T w|^2 - alpha_u^2 |c_u^T w|^2``.
    The noise powers only enter ``c``; leave them at zero when ``c`` is not needed.
    """
    ku = aux.alpha_u * np.sqrt(1 + aux.gamma_u)
    kt = aux.alpha_te * np.sqrt(1 + aux.gamma_te)
    v = 2 * ku * aux.phase_u * c_u - 2 * kt * aux.phase_te * c_te
    M = aux.alpha_te ** 2 * np.outer(c_te.conj(), c_te) - aux.alpha_u ** 2 * np.outer(c_u.conj(), c_u)
    M = 0.5 * (M + M.conj().T)
    c = (np.log1p(aux.gamma_u) - aux.gamma_u - np.log1p(aux.gamma_te) + aux.gamma_te
         + aux.alpha_te ** 2 * sigma2_te - aux.alpha_u ** 2 * sigma2_u)
    return TransformConstants(float(c), v, M)


def scenario_constants(aux: AuxiliaryState, phi: np.ndarray, s: Scenario) -> TransformConstants:
    return transform_constants(
        aux, effective_user_channel(phi, s), effective_ed_channel(phi, s), s.sigma2_u, s.sigma2_te
    )


def lifted_objective(k: TransformConstants, w: np.ndarray, R: np.ndarray) -> float:
    """``c + Re(v^T w) + tr(M R)`` for a total covariance ``R``."""
    return k.c + float(np.real(k.v @ w)) + float(np.real(np.sum(k.M.T * R)))


def transformed_objective(d: DesignState, aux: AuxiliaryState, s: Scenario) -> float:
    k = scenario_constants(aux, d.phi, s)
    R = np.outer(d.w, d.w.conj()) + d.W_n @ d.W_n.conj().T
    return lifted_objective(k, d.w, R)


def user_part(d: DesignState, aux: AuxiliaryState, s: Scenario) -> float:
    """Transformed user-rate term; never exceeds the true user rate."""
    return _part(effective_user_channel(d.phi, s), d, aux.alpha_u, aux.gamma_u, aux.phase_u, s.sigma2_u)


def ed_part(d: DesignState, aux: AuxiliaryState, s: Scenario) -> float:
    """Transformed ED-rate term; never exceeds the true ED rate."""
    return _part(effective_ed_channel(d.phi, s), d, aux.alpha_te, aux.gamma_te, aux.phase_te, s.sigma2_te)


def _part(c, d, alpha, gamma, phase, noise):
    z = c @ d.w
    total = abs(z) ** 2 + float(np.sum(np.abs(c @ d.W_n) ** 2)) + noise
    return (2 * alpha * np.sqrt(1 + gamma) * np.real(phase * z) - alpha ** 2 * total
            + np.log1p(gamma) - gamma)

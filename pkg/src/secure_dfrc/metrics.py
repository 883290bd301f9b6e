"""Exact performance metrics of a design: radar SNR and the three rates.

Rates are in nats.  The AN symbol vector is unit-variance, so all AN power
lives in ``W_n``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .scenario import (
    Scenario,
    effective_ed_channel,
    effective_user_channel,
    radar_cascade_channel,
)


@dataclass(frozen=True, eq=False)
class DesignState:
    w: np.ndarray    # (n_tx,) information precoder
    W_n: np.ndarray  # (n_tx, n_tx) AN precoder
    phi: np.ndarray  # (N,) IRS phases

    def __post_init__(self):
        for name in ("w", "W_n", "phi"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=complex))
        n = self.w.shape[0]
        if self.w.ndim != 1 or self.W_n.shape != (n, n):
            raise ValueError("w must be (n,) and W_n (n, n)")

    @property
    def power(self) -> float:
        return float(np.vdot(self.w, self.w).real + np.sum(np.abs(self.W_n) ** 2))

    def with_(self, **changes) -> "DesignState":
        return replace(self, **changes)


def _sinr(c: np.ndarray, d: DesignState, noise: float) -> float:
    signal = abs(c @ d.w) ** 2
    interference = float(np.sum(np.abs(c @ d.W_n) ** 2))
    return signal / (interference + noise)


def radar_snr(d: DesignState, s: Scenario) -> float:
    C = radar_cascade_channel(d.phi, s)
    cov = np.outer(d.w, d.w.conj()) + d.W_n @ d.W_n.conj().T
    return float(np.real(np.trace(C @ cov @ C.conj().T))) / s.sigma2_r


def user_sinr(d: DesignState, s: Scenario) -> float:
    return _sinr(effective_user_channel(d.phi, s), d, s.sigma2_u)


def ed_sinr(d: DesignState, s: Scenario) -> float:
    return _sinr(effective_ed_channel(d.phi, s), d, s.sigma2_te)


def user_rate(d: DesignState, s: Scenario) -> float:
    return float(np.log1p(user_sinr(d, s)))


def ed_rate(d: DesignState, s: Scenario) -> float:
    return float(np.log1p(ed_sinr(d, s)))


def secrecy_rate(d: DesignState, s: Scenario) -> float:
    """``R_u - R_te``; negative when the eavesdropper is better off."""
    return user_rate(d, s) - ed_rate(d, s)

"""Independent check of an SDP solution against the original problem data."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .problem import SdpProblem
from .solver import SdpSolution


@dataclass
class VerifyReport:
    max_violation: float
    min_eigenvalues: list[float]
    dual_min_eigenvalues: list[float]
    sign_violation: float
    gap: float
    flagged: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.flagged


def verify(solution: SdpSolution, problem: SdpProblem, tol: float = 1e-6) -> VerifyReport:
    """Recompute feasibility, PSD-ness and duality from scratch.

    Violations are relative to ``1 + |rhs|`` for rows and to
    ``1 + ||X||`` for eigenvalues, and the gap to ``1 + |<C, X>|``.
    Anything above ``tol`` is flagged.
    """
    X = solution.X
    flagged = []
    worst = 0.0
    for i, c in enumerate(problem.constraints):
        v = c.violation(X) / (1.0 + abs(c.rhs))
        worst = max(worst, v)
        if v > tol:
            flagged.append(f"row {i} ({c.name or c.sense}) violated by {v:.3e}")
    eigs = []
    for k, Xk in enumerate(X):
        e = float(np.linalg.eigvalsh(Xk)[0])
        eigs.append(e)
        if e < -tol * (1.0 + np.linalg.norm(Xk)):
            flagged.append(f"block {k} has eigenvalue {e:.3e}")

    # dual slack S = sum y_i A_i - C recomputed from the data
    y = solution.y
    dual_eigs = []
    for k, n in enumerate(problem.blocks):
        Sk = -problem.objective.get(k, np.zeros((n, n)))
        for yi, c in zip(y, problem.constraints):
            if k in c.coeffs:
                Sk = Sk + yi * c.coeffs[k]
        e = float(np.linalg.eigvalsh(0.5 * (Sk + Sk.T))[0])
        dual_eigs.append(e)
        if e < -tol * (1.0 + np.linalg.norm(Sk)):
            flagged.append(f"dual block {k} has eigenvalue {e:.3e}")
    sign = 0.0
    for yi, c in zip(y, problem.constraints):
        if c.sense == "<=":
            sign = max(sign, -yi)
        elif c.sense == ">=":
            sign = max(sign, yi)
    scale = 1.0 + float(np.max(np.abs(y), initial=0.0))
    if sign > tol * scale:
        flagged.append(f"multiplier sign violated by {sign:.3e}")

    pobj = problem.objective_value(X)
    dobj = problem.offset + float(sum(yi * c.rhs for yi, c in zip(y, problem.constraints)))
    gap = dobj - pobj
    # relative to the linear part: a constant offset carries no error of its own
    if abs(gap) > tol * (1.0 + abs(pobj - problem.offset)):
        flagged.append(f"duality gap {gap:.3e}")
    return VerifyReport(worst, eigs, dual_eigs, sign, gap, flagged)

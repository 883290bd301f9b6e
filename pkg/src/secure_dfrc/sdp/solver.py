"""Primal-dual interior-point solver for small dense block SDPs.

The program is embedded in the homogeneous self-dual model with variables
``(X, y, S, tau, kappa)``; each iteration uses Nesterov-Todd scaling on every
PSD block and a Mehrotra predictor-corrector step.  All 1x1 blocks, including
the slacks added for inequality rows, are handled together as a nonnegative
orthant.  Rows and the objective are normalized before the solve and the
result is mapped back, so badly scaled inputs (objective coefficients in the
1e6 range next to unit-trace constraints) do not stall the method.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .problem import SdpProblem


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    SLOW_PROGRESS = "slow_progress"


class SdpError(RuntimeError):
    def __init__(self, message: str, solution: "SdpSolution | None" = None):
        super().__init__(message)
        self.solution = solution


class Infeasible(SdpError):
    pass


class SlowProgress(SdpError):
    pass


@dataclass
class IterateInfo:
    primal_obj: float
    dual_obj: float
    complementarity: float  # <X, S> + tau kappa, scaled units; never negative
    primal_res: float
    dual_res: float
    tau: float
    kappa: float


@dataclass
class SdpSolution:
    """Result in the maximization sense of :class:`SdpProblem`.

    ``y`` holds one multiplier per constraint with
    ``sum_i y_i A_i - C = S`` PSD; ``<=`` rows have ``y >= 0`` and ``>=`` rows
    ``y <= 0``.  For an infeasible status, ``certificate`` names the side
    (``"primal"`` or ``"dual"``) that was proven infeasible.
    """

    status: Status
    X: list[np.ndarray]
    y: np.ndarray
    S: list[np.ndarray]
    primal_objective: float
    dual_objective: float
    iterations: int
    primal_residual: float
    dual_residual: float
    gap: float
    certificate: str | None = None
    history: list[IterateInfo] = field(default_factory=list)

    @property
    def objective(self) -> float:
        return self.primal_objective


@dataclass
class _Data:
    """Standard-form data: min <C,X> s.t. A(X) = b, cone = PSD blocks x orthant."""

    sdp_dims: list[int]
    A_s: list[np.ndarray]   # (m, n, n) per PSD block
    C_s: list[np.ndarray]
    A_l: np.ndarray         # (m, p)
    c_l: np.ndarray
    b: np.ndarray
    sdp_index: list[int]    # user block -> position in A_s, or -1
    lp_index: dict[int, int]  # user 1x1 block -> orthant coordinate
    row_scale: np.ndarray
    obj_scale: float

    @property
    def m(self):
        return self.b.size

    @property
    def nu(self):
        return sum(self.sdp_dims) + self.c_l.size


def _standard_form(p: SdpProblem) -> _Data:
    m = p.n_constraints
    sdp_dims, sdp_index, lp_index = [], [], {}
    for k, n in enumerate(p.blocks):
        if n == 1:
            lp_index[k] = len(lp_index)
            sdp_index.append(-1)
        else:
            sdp_index.append(len(sdp_dims))
            sdp_dims.append(n)
    n_user_lp = len(lp_index)
    n_slack = sum(c.sense != "=" for c in p.constraints)

    A_s = [np.zeros((m, n, n)) for n in sdp_dims]
    C_s = [np.zeros((n, n)) for n in sdp_dims]
    A_l = np.zeros((m, n_user_lp + n_slack))
    c_l = np.zeros(n_user_lp + n_slack)
    b = np.array([c.rhs for c in p.constraints], dtype=float)

    def put(target_s, target_l, k, a):
        a = 0.5 * (a + a.T)
        if sdp_index[k] >= 0:
            target_s[sdp_index[k]][...] += a
        else:
            target_l[lp_index[k]] += a[0, 0]

    for k, a in p.objective.items():
        put(C_s, c_l, k, -a)  # maximize -> minimize
    slack = n_user_lp
    for i, con in enumerate(p.constraints):
        for k, a in con.coeffs.items():
            put([A[i] for A in A_s], A_l[i], k, a)
        if con.sense != "=":
            A_l[i, slack] = 1.0 if con.sense == "<=" else -1.0
            slack += 1

    row_norm = np.sqrt(sum(np.sum(A ** 2, axis=(1, 2)) for A in A_s) + np.sum(A_l ** 2, axis=1))
    row_scale = np.where(row_norm > 0, row_norm, 1.0)
    A_s = [A / row_scale[:, None, None] for A in A_s]
    A_l = A_l / row_scale[:, None]
    b = b / row_scale
    c_norm = np.sqrt(sum(np.sum(C ** 2) for C in C_s) + np.sum(c_l ** 2))
    obj_scale = c_norm if c_norm > 0 else 1.0
    C_s = [C / obj_scale for C in C_s]
    c_l = c_l / obj_scale
    return _Data(sdp_dims, A_s, C_s, A_l, c_l, b, sdp_index, lp_index, row_scale, obj_scale)


# -- cone helpers -------------------------------------------------------------

def _chol(X):
    try:
        return np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        lam, V = np.linalg.eigh(0.5 * (X + X.T))
        lam = np.maximum(lam, 1e-300)
        # any square root works as long as X = L L^T
        return V * np.sqrt(lam)


def _nt_scaling(X, S):
    """Return ``(R, Rinv_T, lam)`` with ``R^T S R = R^{-1} X R^{-T} = diag(lam)``."""
    L1, L2 = _chol(X), _chol(S)
    U, lam, Vt = np.linalg.svd(L2.T @ L1)
    isq = 1.0 / np.sqrt(lam)
    R = (L1 @ Vt.T) * isq
    Rinv_T = (L2 @ U) * isq
    return R, Rinv_T, lam


def _max_step_psd(lam, D):
    """Largest alpha with ``diag(lam) + alpha D`` PSD (inf when unbounded)."""
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        s = 1.0 / np.sqrt(lam)
        scaled = D * s[:, None] * s[None, :]
    if not np.all(np.isfinite(scaled)):
        return 0.0  # iterate already on the cone boundary to working precision
    ev = np.linalg.eigvalsh(scaled)[0]
    return -1.0 / ev if ev < 0 else np.inf


def _max_step_lp(lam, d):
    neg = d < 0
    return float(np.min(-lam[neg] / d[neg])) if np.any(neg) else np.inf


def _lyap(lam, T):
    """Solve ``(diag(lam) Z + Z diag(lam)) / 2 = T``."""
    return 2.0 * T / (lam[:, None] + lam[None, :])


def _sym(a):
    return 0.5 * (a + a.T)


# -- main loop -----------------------------------------------------------------

def solve(problem: SdpProblem, tol: float = 1e-7, max_iter: int = 100,
          raise_on_failure: bool = False) -> SdpSolution:
    """Solve ``problem``; see :class:`SdpSolution` for the conventions.

    Optimality needs relative primal and dual residuals at most ``tol`` and a
    duality gap at most ``tol * (1 + |objective|)``.  Residuals are measured
    on the normalized data, the gap in the original objective units.  ``raise_on_failure`` turns non-optimal outcomes into
    :class:`Infeasible` / :class:`SlowProgress` exceptions.
    """
    if not 1e-10 <= tol <= 1e-4:
        raise ValueError("tol must lie in [1e-10, 1e-4]")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    d = _standard_form(problem)
    m = d.m
    b, A_l, c_l = d.b, d.A_l, d.c_l
    A_flat = [A.reshape(m, -1) for A in d.A_s]
    norm_b = 1.0 + np.linalg.norm(b)
    norm_c = 1.0 + np.sqrt(sum(np.sum(C ** 2) for C in d.C_s) + np.sum(c_l ** 2))

    X = [np.eye(n) for n in d.sdp_dims]
    S = [np.eye(n) for n in d.sdp_dims]
    x_l = np.ones(c_l.size)
    s_l = np.ones(c_l.size)
    y = np.zeros(m)
    tau = kappa = 1.0
    nu = d.nu + 1

    def A_op(Xs, xl):
        out = A_l @ xl
        for Af, Xk in zip(A_flat, Xs):
            out = out + Af @ Xk.ravel()
        return out

    def At_op(v):
        return [np.tensordot(v, A, axes=1) for A in d.A_s], A_l.T @ v

    def inner_c(Xs, xl):
        return float(sum(np.sum(C * Xk) for C, Xk in zip(d.C_s, Xs)) + c_l @ xl)

    history: list[IterateInfo] = []
    status, certificate = Status.SLOW_PROGRESS, None
    small_steps = 0
    it = 0
    for it in range(max_iter + 1):
        cx, by = inner_c(X, x_l), float(b @ y)
        rp = A_op(X, x_l) - b * tau
        Aty_s, Aty_l = At_op(y)
        rd_s = [Ay + Sk - C * tau for Ay, Sk, C in zip(Aty_s, S, d.C_s)]
        rd_l = Aty_l + s_l - c_l * tau
        rg = cx - by + kappa
        comp = float(sum(np.sum(Xk * Sk) for Xk, Sk in zip(X, S)) + x_l @ s_l)
        mu = (comp + tau * kappa) / nu

        pres = np.linalg.norm(rp) / tau / norm_b
        dres = np.sqrt(sum(np.sum(r ** 2) for r in rd_s) + np.sum(rd_l ** 2)) / tau / norm_c
        pobj, dobj = cx / tau, by / tau
        gap = abs(pobj - dobj)
        history.append(IterateInfo(-pobj, -dobj, comp + tau * kappa, pres, dres, tau, kappa))

        # the gap test is in the caller's objective units, so a large ||C||
        # cannot hide an absolute gap behind the normalization
        if pres <= tol and dres <= tol and gap * d.obj_scale <= tol * (1.0 + abs(pobj) * d.obj_scale):
            status = Status.OPTIMAL
            break
        # Infeasibility certificates from the embedding's direction.
        if by > 0:
            Aty_s_only, Aty_l_only = Aty_s, Aty_l
            res = np.sqrt(sum(np.sum((Ay + Sk) ** 2) for Ay, Sk in zip(Aty_s_only, S))
                          + np.sum((Aty_l_only + s_l) ** 2))
            if res / by <= tol and tau <= tol * max(1.0, kappa) * 1e3:
                status, certificate = Status.INFEASIBLE, "primal"
                break
        if cx < 0:
            res = np.linalg.norm(A_op(X, x_l))
            if res / -cx <= tol and tau <= tol * max(1.0, kappa) * 1e3:
                status, certificate = Status.INFEASIBLE, "dual"
                break
        if it == max_iter:
            break

        # -- scaling and Schur complement
        scal = [_nt_scaling(Xk, Sk) for Xk, Sk in zip(X, S)]
        At_tilde = []
        M = np.zeros((m, m))
        a_c = np.zeros(m)
        cwc = 0.0
        C_tilde = []
        for (R, _, _), A, C in zip(scal, d.A_s, d.C_s):
            At = np.einsum("ji,mjk,kl->mil", R, A, R, optimize=True)
            Ct = R.T @ C @ R
            flat = At.reshape(m, -1)
            M += flat @ flat.T
            a_c += flat @ Ct.ravel()
            cwc += float(np.sum(Ct ** 2))
            At_tilde.append(At)
            C_tilde.append(Ct)
        w_l = np.sqrt(x_l / s_l)       # scalar NT scaling, x = w^2 s
        lam_l = np.sqrt(x_l * s_l)
        Al_t = A_l * w_l
        cl_t = c_l * w_l
        M += Al_t @ Al_t.T
        a_c += Al_t @ cl_t
        cwc += float(cl_t @ cl_t)

        try:
            factor = linalg.cho_factor(M + 1e-14 * np.trace(M) / max(m, 1) * np.eye(m))

            def msolve(r):
                return linalg.cho_solve(factor, r)
        except linalg.LinAlgError:
            Mp = np.linalg.pinv(M)

            def msolve(r):
                return Mp @ r

        rdt_s = [R.T @ r @ R for (R, _, _), r in zip(scal, rd_s)]
        rdt_l = rd_l * w_l
        q = msolve(a_c + b)

        def direction(eta, T_s, T_l, r_tau):
            # scaled complementarity right-hand sides -> Z = R^{-1} R_X R^{-T}
            Z_s = [_lyap(lam, T) for (_, _, lam), T in zip(scal, T_s)]
            Z_l = T_l / lam_l
            h1 = -eta * rp - sum(f @ (Z + eta * r).ravel() for f, Z, r in
                                 zip((a.reshape(m, -1) for a in At_tilde), Z_s, rdt_s))
            h1 = h1 - Al_t @ (Z_l + eta * rdt_l)
            h2 = (-eta * rg - sum(np.sum(Ct * (Z + eta * r)) for Ct, Z, r in zip(C_tilde, Z_s, rdt_s))
                  - cl_t @ (Z_l + eta * rdt_l) - r_tau / tau)
            p_ = msolve(h1)
            den = (a_c - b) @ q - cwc - kappa / tau
            dtau = (h2 - (a_c - b) @ p_) / den
            dy = p_ + q * dtau
            dS_t = [-eta * r - np.tensordot(dy, At, axes=1) + Ct * dtau
                    for r, At, Ct in zip(rdt_s, At_tilde, C_tilde)]
            dS_tl = -eta * rdt_l - Al_t.T @ dy + cl_t * dtau
            dX_t = [_sym(Z - s) for Z, s in zip(Z_s, dS_t)]
            dX_tl = Z_l - dS_tl
            dkappa = (r_tau - kappa * dtau) / tau
            return dX_t, dX_tl, [_sym(s) for s in dS_t], dS_tl, dy, dtau, dkappa

        def max_step(dX_t, dX_tl, dS_t, dS_tl, dtau, dkappa):
            steps = [1e300]
            for (_, _, lam), dx, ds in zip(scal, dX_t, dS_t):
                steps += [_max_step_psd(lam, dx), _max_step_psd(lam, ds)]
            if lam_l.size:
                steps += [_max_step_lp(lam_l, dX_tl), _max_step_lp(lam_l, dS_tl)]
            if dtau < 0:
                steps.append(-tau / dtau)
            if dkappa < 0:
                steps.append(-kappa / dkappa)
            return min(steps)

        # predictor
        T_s = [-np.diag(lam ** 2) for (_, _, lam) in scal]
        T_l = -lam_l ** 2
        aff = direction(1.0, T_s, T_l, -tau * kappa)
        alpha_a = min(1.0, max_step(aff[0], aff[1], aff[2], aff[3], aff[5], aff[6]))
        sigma = (1.0 - alpha_a) ** 3

        # corrector
        T_s = [
            sigma * mu * np.eye(lam.size) - np.diag(lam ** 2) - _sym(dx @ ds)
            for (_, _, lam), dx, ds in zip(scal, aff[0], aff[2])
        ]
        T_l = sigma * mu - lam_l ** 2 - aff[1] * aff[3]
        r_tau = sigma * mu - tau * kappa - aff[5] * aff[6]
        dX_t, dX_tl, dS_t, dS_tl, dy, dtau, dkappa = direction(1.0 - sigma, T_s, T_l, r_tau)
        alpha = min(1.0, 0.99 * max_step(dX_t, dX_tl, dS_t, dS_tl, dtau, dkappa))

        for k, (R, Rinv_T, _) in enumerate(scal):
            X[k] = _sym(X[k] + alpha * (R @ dX_t[k] @ R.T))
            S[k] = _sym(S[k] + alpha * (Rinv_T @ dS_t[k] @ Rinv_T.T))
        x_l = x_l + alpha * w_l * dX_tl
        s_l = s_l + alpha * dS_tl / w_l
        y = y + alpha * dy
        tau += alpha * dtau
        kappa += alpha * dkappa

        small_steps = small_steps + 1 if alpha < 1e-8 else 0
        if small_steps >= 3:
            break

    return _finish(problem, d, X, x_l, y, S, s_l, tau, kappa, status, certificate, it,
                   history, raise_on_failure)


def _finish(problem, d, X, x_l, y, S, s_l, tau, kappa, status, certificate, it, history,
            raise_on_failure):
    scale = 1.0 if status is Status.INFEASIBLE else 1.0 / tau
    blocks = []
    duals = []
    for k, n in enumerate(problem.blocks):
        j = d.sdp_index[k]
        if j >= 0:
            blocks.append(X[j] * scale)
            duals.append(S[j] * scale * d.obj_scale)
        else:
            blocks.append(np.array([[x_l[d.lp_index[k]] * scale]]))
            duals.append(np.array([[s_l[d.lp_index[k]] * scale * d.obj_scale]]))
    # min-form multipliers of the normalized rows -> max-form multipliers
    y_out = -(y * scale) * d.obj_scale / d.row_scale
    pobj = problem.objective_value(blocks)
    dobj = float(np.array([c.rhs for c in problem.constraints]) @ y_out) + problem.offset
    last = history[-1]
    sol = SdpSolution(
        status=status, X=blocks, y=y_out, S=duals, primal_objective=pobj, dual_objective=dobj,
        iterations=it, primal_residual=last.primal_res, dual_residual=last.dual_res,
        gap=abs(pobj - dobj), certificate=certificate, history=history,
    )
    if raise_on_failure and status is not Status.OPTIMAL:
        cls = Infeasible if status is Status.INFEASIBLE else SlowProgress
        raise cls(f"SDP solve ended with status {status.value}", sol)
    return sol

"""Solvers for the penalized, constrained, single-penalty, and scaled problems.

The penalized problem  min ||y - X b||_2^2 + lam*||b||_1 + lam_g*||b||_{1,2}
is solved by accelerated proximal gradient with a monotone restart; the
constrained problem  min ||b||_1 + ratio*||b||_{1,2}  s.t.  Xb = y  by
consensus ADMM whose b-update projects onto the affine feasible set through
a cached SVD of X.  Every solve call is single-threaded and reentrant;
callers parallelize across replicates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .groups import Dataset, GroupPartition, GroupedVector
from .prox import sparse_group_prox_array

__all__ = [
    "SolveOptions",
    "SolverResult",
    "solve_sgl",
    "kkt_residual_sgl",
    "solve_noiseless",
    "solve_lasso",
    "solve_group_lasso",
    "solve_l1_min",
    "solve_l12_min",
    "solve_scaled_sgl",
]


@dataclass
class SolveOptions:
    """Iteration budgets and tolerances shared by the solvers.

    tol_kkt=None resolves to 1e-6 * (1 + ||X'y||_{inf,2}) at solve time.
    """

    max_iters: int = 50_000
    tol_rel_obj: float = 1e-14
    tol_kkt: Optional[float] = None
    tol_feasibility: float = 1e-8
    admm_rho: float = 1.0
    step_rule: str = "fixed-lipschitz"  # or "backtracking"
    restart: bool = True
    kkt_every: int = 25

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol_rel_obj <= 0 or self.tol_feasibility <= 0:
            raise ValueError("tolerances must be > 0")
        if self.tol_kkt is not None and self.tol_kkt <= 0:
            raise ValueError("tol_kkt must be > 0 (or None for automatic)")
        if self.admm_rho <= 0:
            raise ValueError("admm_rho must be > 0")
        if self.step_rule not in ("fixed-lipschitz", "backtracking"):
            raise ValueError(f"unknown step_rule {self.step_rule!r}")


@dataclass
class SolverResult:
    """Estimate plus convergence diagnostics for one solve."""

    beta_hat: GroupedVector
    objective: float
    iters: int
    kkt_residual: float
    feasibility_residual: float
    status: str  # converged | max-iters | diverged
    notes: tuple = ()
    objective_history: Optional[np.ndarray] = None


def _power_sigma_max(X: np.ndarray, iters: int = 100) -> float:
    """Largest eigenvalue of X'X by power iteration (deterministic start)."""
    p = X.shape[1]
    v = np.ones(p) / math.sqrt(p)
    lam = 0.0
    for _ in range(iters):
        w = X.T @ (X @ v)
        lam = np.linalg.norm(w)
        if lam == 0.0:
            return 0.0
        v = w / lam
    return float(lam)


def _group_norm_sum(v: np.ndarray, starts: np.ndarray) -> float:
    return float(np.sqrt(np.add.reduceat(v * v, starts)).sum())


def _kkt_residual_array(
    grad_half: np.ndarray,
    beta: np.ndarray,
    lam: float,
    lam_g: float,
    partition: GroupPartition,
) -> float:
    """Stationarity residual; grad_half = X'(Xb - y), half the smooth gradient.

    Combines the group-wise display test ||H_lam(X'(Xb-y))||_{inf,2} <= lam_g
    with the exact subgradient conditions of the full objective; the result is
    zero iff beta is a stationary point.
    """
    starts, sizes = partition.starts, partition.sizes
    h = np.sign(grad_half) * np.maximum(np.abs(grad_half) - lam, 0.0)
    disp_norms = np.sqrt(np.add.reduceat(h * h, starts))
    res = max(0.0, float(disp_norms.max()) - lam_g)

    g = 2.0 * grad_half
    bnorms = np.sqrt(np.add.reduceat(beta * beta, starts))
    hz = np.sign(g) * np.maximum(np.abs(g) - lam, 0.0)
    hz_norms = np.sqrt(np.add.reduceat(hz * hz, starts))
    inactive = bnorms == 0.0
    if inactive.any():
        res = max(res, max(0.0, float(hz_norms[inactive].max()) - lam_g))
    for j in np.flatnonzero(~inactive):
        sl = slice(starts[j], starts[j] + sizes[j])
        gj, bj = g[sl], beta[sl]
        nz = bj != 0.0
        stat = gj[nz] + lam * np.sign(bj[nz]) + lam_g * bj[nz] / bnorms[j]
        res = max(res, float(np.abs(stat).max()))
        if (~nz).any():
            res = max(res, max(0.0, float(np.abs(gj[~nz]).max()) - lam))
    return res


def kkt_residual_sgl(data: Dataset, beta, lam: float, lam_g: float) -> float:
    """Stationarity residual of beta for the penalized problem (0 iff optimal)."""
    if lam < 0 or lam_g < 0:
        raise ValueError("penalties must be >= 0")
    b = beta.values if isinstance(beta, GroupedVector) else np.asarray(beta, float)
    grad_half = data.X.T @ (data.X @ b - data.y)
    return _kkt_residual_array(grad_half, b, lam, lam_g, data.partition)


def _apg(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    lam_g: float,
    partition: GroupPartition,
    opts: SolveOptions,
    beta0: Optional[np.ndarray] = None,
    sigma_max: Optional[float] = None,
):
    """FISTA with monotone restart on the sparse-group objective.

    Returns (beta, result_fields) where result_fields feeds SolverResult.
    """
    n, p = X.shape
    starts = partition.starts
    Xty = X.T @ y
    tol_kkt = opts.tol_kkt
    if tol_kkt is None:
        inf2 = np.sqrt(np.add.reduceat(Xty * Xty, starts)).max() if p else 0.0
        tol_kkt = 1e-6 * (1.0 + float(inf2))

    if sigma_max is None:
        sigma_max = _power_sigma_max(X)
    L = 2.0 * 1.05 * max(sigma_max, 1e-30)
    t = 1.0 / L
    backtracking = opts.step_rule == "backtracking"

    def penalty(v):
        out = lam * float(np.abs(v).sum()) if lam else 0.0
        if lam_g:
            out += lam_g * _group_norm_sum(v, starts)
        return out

    beta = np.zeros(p) if beta0 is None else np.asarray(beta0, float).copy()
    r = y - X @ beta
    F = float(r @ r) + penalty(beta)
    F0 = F
    zk = beta.copy()
    tk = 1.0
    history = [F]
    status = "max-iters"
    kkt = math.inf
    it = 0
    stall = 0  # consecutive objective stalls (momentum can repeat F transiently)

    def prox_step(point, grad, step):
        return sparse_group_prox_array(
            point - step * grad, partition, step * lam, step * lam_g
        )

    for it in range(1, opts.max_iters + 1):
        g = 2.0 * (X.T @ (X @ zk) - Xty)
        if backtracking:
            fz = float(np.linalg.norm(y - X @ zk) ** 2)
            while True:
                cand = prox_step(zk, g, t)
                rc = y - X @ cand
                fc = float(rc @ rc)
                diff = cand - zk
                if fc <= fz + g @ diff + (diff @ diff) / (2.0 * t) + 1e-12:
                    break
                t *= 0.5
        else:
            cand = prox_step(zk, g, t)
            rc = y - X @ cand
        Fc = float(rc @ rc) + penalty(cand)

        if opts.restart and Fc > F:
            # momentum overshoot: plain descent step from the last iterate
            g0 = 2.0 * (X.T @ (X @ beta) - Xty)
            cand = prox_step(beta, g0, t)
            rc = y - X @ cand
            Fc = float(rc @ rc) + penalty(cand)
            tk = 1.0
        tk1 = (1.0 + math.sqrt(1.0 + 4.0 * tk * tk)) / 2.0
        zk = cand + ((tk - 1.0) / tk1) * (cand - beta)
        rel_change = abs(F - Fc) / max(1.0, abs(F))
        beta, F, tk = cand, Fc, tk1
        history.append(F)
        if backtracking:
            t *= 1.05

        if F > 10.0 * F0 + 1e-12:
            status = "diverged"
            break
        stall = stall + 1 if rel_change < opts.tol_rel_obj else 0
        if it % opts.kkt_every == 0 or stall >= 5:
            grad_half = X.T @ (X @ beta - y)
            kkt = _kkt_residual_array(grad_half, beta, lam, lam_g, partition)
            if kkt <= tol_kkt:
                status = "converged"
                break
            if stall >= 5:
                status = "converged"
                break
    if not math.isfinite(kkt) or status == "max-iters":
        grad_half = X.T @ (X @ beta - y)
        kkt = _kkt_residual_array(grad_half, beta, lam, lam_g, partition)
        if status == "max-iters" and kkt <= tol_kkt:
            status = "converged"
    feas = float(np.linalg.norm(y - X @ beta))
    return beta, dict(
        objective=F,
        iters=it,
        kkt_residual=kkt,
        feasibility_residual=feas,
        status=status,
        objective_history=np.asarray(history),
    )


def solve_sgl(
    data: Dataset,
    lam: float,
    lam_g: float,
    opts: Optional[SolveOptions] = None,
    beta_init: Optional[np.ndarray] = None,
) -> SolverResult:
    """Sparse group Lasso: min ||y - Xb||_2^2 + lam*||b||_1 + lam_g*||b||_{1,2}."""
    if lam < 0 or lam_g < 0:
        raise ValueError("penalties must be >= 0")
    if lam == 0 and lam_g == 0 and data.n < data.p:
        raise ValueError("unpenalized problem is underdetermined (n < p)")
    opts = opts or SolveOptions()
    beta, info = _apg(data.X, data.y, lam, lam_g, data.partition, opts, beta_init)
    return SolverResult(beta_hat=data.grouped(beta), **info)


def solve_lasso(data: Dataset, lam: float, opts: Optional[SolveOptions] = None):
    """Plain Lasso; the group penalty weight is zero."""
    return solve_sgl(data, lam, 0.0, opts)


def solve_group_lasso(data: Dataset, lam_g: float, opts: Optional[SolveOptions] = None):
    """Group Lasso; the element-wise penalty weight is zero."""
    return solve_sgl(data, 0.0, lam_g, opts)


def _solve_constrained(
    data: Dataset, w1: float, w2: float, opts: SolveOptions
) -> SolverResult:
    """min w1*||b||_1 + w2*||b||_{1,2}  s.t.  Xb = y, by consensus ADMM.

    The b-update projects onto {Xb = y} through a cached thin SVD; the
    z-update is the sparse-group prox.  The penalty parameter is rebalanced
    (x2 / /2) whenever the primal/dual residual ratio exceeds 10.
    """
    X, y, partition = data.X, data.y, data.partition
    n, p = X.shape
    starts = partition.starts

    U, S, Vt = np.linalg.svd(X, full_matrices=False)
    rank = int(np.sum(S > max(n, p) * np.finfo(float).eps * (S[0] if S.size else 0)))
    U, S, Vt = U[:, :rank], S[:rank], Vt[:rank]
    y_proj = U @ (U.T @ y)
    if np.linalg.norm(y_proj - y) > 1e-8 * (1.0 + np.linalg.norm(y)):
        raise ValueError("y is not in the range of X: the system Xb = y is infeasible")
    c = Vt.T @ ((U.T @ y) / S)  # min-norm feasible point

    def project(v):
        return v - Vt.T @ (Vt @ v) + c

    rho = opts.admm_rho
    tol = opts.tol_feasibility
    eps_abs = tol * 0.1
    z = np.zeros(p)
    u = np.zeros(p)
    beta = c.copy()
    status = "max-iters"
    pri = dua = math.inf
    it = 0
    for it in range(1, opts.max_iters + 1):
        beta = project(z - u)
        z_old = z
        z = sparse_group_prox_array(beta + u, partition, w1 / rho, w2 / rho)
        u += beta - z
        pri = float(np.linalg.norm(beta - z))
        dua = rho * float(np.linalg.norm(z - z_old))
        eps_pri = math.sqrt(p) * eps_abs + tol * max(
            np.linalg.norm(beta), np.linalg.norm(z)
        )
        eps_dua = math.sqrt(p) * eps_abs + tol * rho * float(np.linalg.norm(u))
        if pri <= eps_pri and dua <= eps_dua:
            status = "converged"
            break
        if it % 10 == 0:
            if pri > 10.0 * dua:
                rho *= 2.0
                u /= 2.0
            elif dua > 10.0 * pri:
                rho /= 2.0
                u *= 2.0

    obj = w1 * float(np.abs(beta).sum()) + w2 * _group_norm_sum(beta, starts)
    feas = float(np.linalg.norm(X @ beta - y))
    return SolverResult(
        beta_hat=data.grouped(beta),
        objective=obj,
        iters=it,
        kkt_residual=max(pri, dua),
        feasibility_residual=feas,
        status=status,
    )


def solve_noiseless(
    data: Dataset, ratio: float, opts: Optional[SolveOptions] = None
) -> SolverResult:
    """Constrained minimization of ||b||_1 + ratio*||b||_{1,2} subject to Xb = y.

    ratio is the group-to-element penalty ratio; callers following the
    exact-recovery theory set it to sqrt(s/s_g).
    """
    if ratio < 0:
        raise ValueError("ratio must be >= 0")
    return _solve_constrained(data, 1.0, ratio, opts or SolveOptions())


def solve_l1_min(data: Dataset, opts: Optional[SolveOptions] = None) -> SolverResult:
    """Constrained l1 minimization (basis pursuit)."""
    return _solve_constrained(data, 1.0, 0.0, opts or SolveOptions())


def solve_l12_min(data: Dataset, opts: Optional[SolveOptions] = None) -> SolverResult:
    """Constrained l_{1,2} (group norm) minimization."""
    return _solve_constrained(data, 0.0, 1.0, opts or SolveOptions())


def solve_scaled_sgl(
    data: Dataset,
    lambda_t: float,
    lambda_gt: float,
    opts: Optional[SolveOptions] = None,
    penalty: str = "grouped",
    max_outer: int = 100,
) -> tuple:
    """Scaled estimator: joint minimization over (beta, sigma).

    Alternates a closed-form sigma-update sigma = ||y - Xb||_2 / sqrt(n) with a
    beta-update that reuses solve_sgl with penalties scaled by sigma.  With
    penalty="l2" the group term is the literal whole-vector Euclidean norm
    (one group spanning all coordinates) instead of ||.||_{1,2}.

    Returns (SolverResult, sigma_hat).
    """
    if lambda_t < 0 or lambda_gt < 0:
        raise ValueError("tuning weights must be >= 0")
    if penalty not in ("grouped", "l2"):
        raise ValueError(f"unknown penalty {penalty!r}")
    opts = opts or SolveOptions()
    part = (
        data.partition if penalty == "grouped" else GroupPartition((data.partition.p,))
    )
    n = data.n
    sigma_max = _power_sigma_max(data.X)
    sigma = max(float(np.linalg.norm(data.y)) / math.sqrt(n), 1e-12)
    beta = None
    notes = ()
    info = None
    SIGMA_FLOOR = 1e-12
    for _ in range(max_outer):
        beta, info = _apg(
            data.X,
            data.y,
            sigma * lambda_t,
            sigma * lambda_gt,
            part,
            opts,
            beta0=beta,
            sigma_max=sigma_max,
        )
        resid = float(np.linalg.norm(data.y - data.X @ beta))
        sigma_new = resid / math.sqrt(n)
        if sigma_new < SIGMA_FLOOR:
            sigma_new = SIGMA_FLOOR
            notes = ("sigma-floor",)
        if abs(sigma_new - sigma) < 1e-6 * max(sigma, SIGMA_FLOOR):
            sigma = sigma_new
            break
        sigma = sigma_new
    result = SolverResult(beta_hat=data.grouped(beta), notes=notes, **info)
    return result, sigma

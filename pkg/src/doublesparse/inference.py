"""Debiased estimation and per-coordinate confidence intervals.

The inverse-covariance row estimates solve, for each coordinate i,

    minimize  m' S m   subject to  ||H_alpha(S m - e_i)||_{inf,2} <= gamma

with S the sample covariance.  The constraint set is the Minkowski sum of
the alpha-box and the gamma-ball taken group-wise, so its Euclidean
projection is clipping plus a rescaling of the soft-thresholded excess,
which makes an operator-splitting scheme exact.  All rows share one
factorization and are updated simultaneously.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.stats import norm as _normal

from .groups import Dataset, GroupPartition, GroupedVector

__all__ = [
    "MRowOptions",
    "InfeasibleConstraintError",
    "DebiasResult",
    "ConfidenceInterval",
    "estimate_M_row",
    "estimate_M",
    "debias",
    "confidence_intervals",
    "cis_to_csv",
]


class InfeasibleConstraintError(RuntimeError):
    """Raised when the row constraint cannot be satisfied; carries the group."""

    def __init__(self, message: str, group_index: int):
        super().__init__(message)
        self.group_index = group_index


@dataclass
class MRowOptions:
    rho: float = 1.0
    max_iters: int = 20_000
    tol_violation: float = 1e-6
    tol_resid: float = 1e-9
    stagnation_check: int = 500

    def __post_init__(self):
        if self.rho <= 0 or self.max_iters < 1:
            raise ValueError("rho must be > 0 and max_iters >= 1")


def _project_columns(V, alpha, gamma, partition: GroupPartition):
    """Project each column of V onto {v : ||H_alpha(v)||_{inf,2} <= gamma}."""
    core = np.clip(V, -alpha, alpha)
    excess = V - core
    gn = np.sqrt(np.add.reduceat(excess * excess, partition.starts, axis=0))
    safe = np.where(gn > 0.0, gn, 1.0)
    scale = np.where(gn > gamma, gamma / safe, 1.0)
    return core + excess * np.repeat(scale, partition.sizes, axis=0)


def _violation_columns(R, alpha, gamma, partition: GroupPartition):
    """Constraint violation per column and the offending group per column."""
    excess = np.abs(R) - alpha
    np.maximum(excess, 0.0, out=excess)
    gn = np.sqrt(np.add.reduceat(excess * excess, partition.starts, axis=0))
    viol = np.maximum(gn - gamma, 0.0)
    return viol.max(axis=0), viol.argmax(axis=0)


def estimate_M(
    Sigma_hat: np.ndarray,
    partition: GroupPartition,
    alpha_thr: float,
    gamma_thr: float,
    opts: Optional[MRowOptions] = None,
    indices: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """Rows m_i of the inverse-covariance surrogate, solved jointly.

    Returns an array whose k-th row solves the constrained quadratic problem
    for coordinate indices[k] (all coordinates by default).  One
    factorization of the splitting system is shared by every row.
    """
    if alpha_thr <= 0 or gamma_thr <= 0:
        raise ValueError("thresholds must be > 0")
    opts = opts or MRowOptions()
    S = np.asarray(Sigma_hat, dtype=float)
    p = S.shape[0]
    if S.shape != (p, p) or partition.p != p:
        raise ValueError("Sigma_hat must be p x p and match the partition")
    idx = np.arange(p) if indices is None else np.asarray(indices, dtype=np.intp)
    k = idx.size

    if alpha_thr + gamma_thr >= 1.0:
        # m = 0 is feasible: ||H_alpha(e_i)||_{inf,2} = (1-alpha)_+ <= gamma
        return np.zeros((k, p))

    rho = opts.rho
    K = 2.0 * S + rho * (S @ S)
    K[np.diag_indices_from(K)] += 1e-10 * max(1.0, float(np.trace(S)) / p)
    factor = cho_factor(K)

    E = np.zeros((p, k))
    E[idx, np.arange(k)] = 1.0
    R = np.zeros((p, k))
    W = np.zeros((p, k))
    M = np.zeros((p, k))
    best = np.zeros((p, k))
    best_obj = np.full(k, math.inf)
    have_best = np.zeros(k, dtype=bool)
    last_viol = np.full(k, math.inf)

    for it in range(1, opts.max_iters + 1):
        M = cho_solve(factor, rho * (S @ (E + R - W)))
        SM = S @ M
        V = SM - E + W
        R_old = R
        R = _project_columns(V, alpha_thr, gamma_thr, partition)
        W += SM - E - R
        pri = float(np.linalg.norm(SM - E - R))
        dua = rho * float(np.linalg.norm(S @ (R - R_old)))

        if it % 25 == 0 or (pri < 1e-12 and dua < 1e-12):
            viol, _ = _violation_columns(SM - E, alpha_thr, gamma_thr, partition)
            feas = viol <= opts.tol_violation
            if feas.any():
                obj = np.einsum("pk,pk->k", M, SM)
                better = feas & (obj < best_obj)
                best[:, better] = M[:, better]
                best_obj[better] = obj[better]
                have_best |= better
            scale = math.sqrt(p * k)
            if feas.all() and pri <= opts.tol_resid * scale and dua <= opts.tol_resid * scale:
                return M.T
            if it % opts.stagnation_check == 0:
                stuck = (viol > 1e-3) & (viol > 0.999 * last_viol)
                if stuck.any():
                    col = int(np.argmax(viol * stuck))
                    _, worst_group = _violation_columns(
                        SM[:, [col]] - E[:, [col]], alpha_thr, gamma_thr, partition
                    )
                    raise InfeasibleConstraintError(
                        f"row {int(idx[col])}: constraint violation "
                        f"{viol[col]:.3e} stagnates above 1e-3",
                        group_index=int(worst_group[0]),
                    )
                last_viol = viol.copy()

    viol, worst_group = _violation_columns(S @ M - E, alpha_thr, gamma_thr, partition)
    bad = viol > opts.tol_violation
    if bad.any():
        if have_best[bad].all():
            M[:, bad] = best[:, bad]
        else:
            col = int(np.argmax(viol))
            raise InfeasibleConstraintError(
                f"row {int(idx[col])}: constraint violation {viol[col]:.3e} "
                f"after {opts.max_iters} iterations",
                group_index=int(worst_group[col]),
            )
    return M.T


def estimate_M_row(
    Sigma_hat: np.ndarray,
    i: int,
    alpha_thr: float,
    gamma_thr: float,
    partition: GroupPartition,
    opts: Optional[MRowOptions] = None,
) -> np.ndarray:
    """Single row of the inverse-covariance surrogate."""
    return estimate_M(Sigma_hat, partition, alpha_thr, gamma_thr, opts, indices=[i])[0]


@dataclass(frozen=True)
class DebiasResult:
    """Debiased estimate with per-coordinate variance factors."""

    beta_u: GroupedVector
    variances: np.ndarray
    M_rows: np.ndarray
    alpha_thr: Optional[float] = None
    gamma_thr: Optional[float] = None

    def __post_init__(self):
        v = np.asarray(self.variances, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "variances", v)


def debias(
    data: Dataset,
    beta_hat,
    M: np.ndarray,
    alpha_thr: Optional[float] = None,
    gamma_thr: Optional[float] = None,
) -> DebiasResult:
    """One-step correction beta_hat + M X'(y - X beta_hat)/n with variances.

    variances[i] = m_i' S m_i for the sample covariance S = X'X/n.  When the
    thresholds that produced M are supplied, the feasibility lower bound
    variances[i] >= (1 - alpha - gamma)^2 / S_ii is verified (tolerance 1e-6).
    """
    b = beta_hat.values if isinstance(beta_hat, GroupedVector) else np.asarray(beta_hat)
    M = np.asarray(M, dtype=float)
    n = data.n
    if M.shape != (data.p, data.p) and M.shape[1] != data.p:
        raise ValueError("M must have p columns")
    resid = data.y - data.X @ b
    correction = M @ (data.X.T @ resid) / n
    if M.shape[0] != data.p:
        raise ValueError("debias needs one row of M per coordinate")
    beta_u = b + correction
    S = data.X.T @ data.X / n
    variances = np.einsum("ip,pq,iq->i", M, S, M)
    if alpha_thr is not None and gamma_thr is not None:
        bound = (1.0 - alpha_thr - gamma_thr) ** 2 / np.diag(S)
        worst = float((bound - variances).max())
        if worst > 1e-6:
            raise ValueError(
                f"variance lower bound violated by {worst:.3e}; "
                "the supplied M rows are not feasible for the stated thresholds"
            )
    return DebiasResult(
        beta_u=data.grouped(beta_u),
        variances=variances,
        M_rows=M,
        alpha_thr=alpha_thr,
        gamma_thr=gamma_thr,
    )


@dataclass(frozen=True)
class ConfidenceInterval:
    index: int
    lo: float
    hi: float
    level: float

    def __post_init__(self):
        if not (0.0 < self.level < 1.0):
            raise ValueError("level must be in (0, 1)")
        if self.lo > self.hi:
            raise ValueError("lo must not exceed hi")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def covers(self, value: float) -> bool:
        return self.lo <= value <= self.hi


def confidence_intervals(
    result: DebiasResult, sigma_hat: float, level: float, n: int
) -> list:
    """Per-coordinate intervals beta_u_i +- z * sigma_hat * sqrt(var_i / n)."""
    if sigma_hat <= 0:
        raise ValueError("sigma_hat must be > 0")
    if not (0.0 < level < 1.0):
        raise ValueError("level must be in (0, 1)")
    z = float(_normal.ppf(0.5 + level / 2.0))
    centers = result.beta_u.values
    half = z * sigma_hat * np.sqrt(result.variances / n)
    return [
        ConfidenceInterval(i, float(c - h), float(c + h), level)
        for i, (c, h) in enumerate(zip(centers, half))
    ]


def cis_to_csv(cis, path, truth=None) -> None:
    """CSV with columns index, estimate, lo, hi, level[, covered]."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["index", "estimate", "lo", "hi", "level"]
        if truth is not None:
            header.append("covered")
        w.writerow(header)
        for ci in cis:
            est = 0.5 * (ci.lo + ci.hi)
            row = [
                ci.index,
                f"{est:.12g}",
                f"{ci.lo:.12g}",
                f"{ci.hi:.12g}",
                f"{ci.level:.12g}",
            ]
            if truth is not None:
                row.append(int(ci.covers(float(truth[ci.index]))))
            w.writerow(row)

"""Numerical verification of the recovery conditions.

Checks the design-correlation (irrepresentability) margin, the restricted
isometry band on simultaneously sparse supports, and the approximate dual
certificate built by the batched golfing recursion, reporting the measured
margin of every condition.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .groups import (
    Dataset,
    GroupPartition,
    GroupedVector,
    SparsityPattern,
    sparsity_of,
)
from .prox import soft_threshold

__all__ = [
    "ConditionCheck",
    "CertificateReport",
    "irrepresentable_margin",
    "rip_check",
    "exact_target",
    "default_batches",
    "golfing_construct",
    "certificate_verify",
    "run_certificate_pipeline",
]

MAX_EXHAUSTIVE_SUPPORTS = 100_000


@dataclass(frozen=True)
class ConditionCheck:
    """Measured value of one certificate condition; margin >= 0 means pass."""

    value: float
    threshold: float
    margin: float
    passed: bool

    @classmethod
    def upper(cls, value: float, threshold: float) -> "ConditionCheck":
        """Condition of the form value <= threshold."""
        m = threshold - value
        return cls(float(value), float(threshold), float(m), bool(m >= 0.0))

    @classmethod
    def lower(cls, value: float, threshold: float) -> "ConditionCheck":
        """Condition of the form value >= threshold."""
        m = value - threshold
        return cls(float(value), float(threshold), float(m), bool(m >= 0.0))


@dataclass(frozen=True)
class CertificateReport:
    """Pass/fail flags and margins for the dual-certificate conditions."""

    sigma_min: ConditionCheck  # least eigenvalue of X_T'X_T/n vs 1/2
    cond_a: ConditionCheck     # on-support approximation x off-support correlation
    cond_b: ConditionCheck     # thresholded group norms off the group support
    cond_c: ConditionCheck     # sup norm inside supported groups, off T
    u: GroupedVector
    batches: tuple = ()

    @property
    def passed(self) -> bool:
        return (
            self.sigma_min.passed
            and self.cond_a.passed
            and self.cond_b.passed
            and self.cond_c.passed
        )

    def to_dict(self) -> dict:
        def enc(c: ConditionCheck, name: str) -> dict:
            return {
                "name": name,
                "value": c.value,
                "threshold": c.threshold,
                "margin": c.margin,
                "passed": c.passed,
            }

        return {
            "passed": self.passed,
            "conditions": [
                enc(self.sigma_min, "sigma_min"),
                enc(self.cond_a, "cond_a"),
                enc(self.cond_b, "cond_b"),
                enc(self.cond_c, "cond_c"),
            ],
            "batches": list(self.batches),
            "u": self.u.values.tolist(),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def irrepresentable_margin(Sigma: np.ndarray, pattern: SparsityPattern) -> float:
    """sqrt(s) * max_{i off support} ||Sigma_{i,T} Sigma_{T,T}^{-1}||_2.

    The exact-recovery condition reads margin <= c for a small constant c.
    """
    Sigma = np.asarray(Sigma, dtype=float)
    p = Sigma.shape[0]
    T = pattern.T_array()
    if T.size == 0:
        return 0.0
    Stt = Sigma[np.ix_(T, T)]
    cond = np.linalg.cond(Stt)
    if not np.isfinite(cond) or cond > 1e12:
        raise ValueError(
            f"Sigma_TT is numerically singular (condition number {cond:.3g})"
        )
    Tc = np.setdiff1d(np.arange(p), T, assume_unique=False)
    if Tc.size == 0:
        return 0.0
    A = np.linalg.solve(Stt, Sigma[np.ix_(T, Tc)])  # s x |Tc|
    row_norms = np.sqrt((A * A).sum(axis=0))
    return float(math.sqrt(T.size) * row_norms.max())


def _iter_supports(partition: GroupPartition, s2: int, s2_g: int):
    """Maximal (s2, s2_g)-sparse supports, deduplicated."""
    d = partition.d
    gsel = min(s2_g, d)
    seen = set()
    for groups in itertools.combinations(range(d), gsel):
        pool = np.concatenate([partition.group_indices(j) for j in groups])
        take = min(s2, pool.size)
        for S in itertools.combinations(pool.tolist(), take):
            if S not in seen:
                seen.add(S)
                yield np.asarray(S, dtype=np.intp)


def _count_supports(partition: GroupPartition, s2: int, s2_g: int) -> int:
    d = partition.d
    gsel = min(s2_g, d)
    total = 0
    for groups in itertools.combinations(range(d), gsel):
        pool = sum(partition.sizes[j] for j in groups)
        total += math.comb(pool, min(s2, pool))
        if total > MAX_EXHAUSTIVE_SUPPORTS:
            return total
    return total


def rip_check(
    X: np.ndarray,
    partition: GroupPartition,
    s2: int,
    s2_g: int,
    mode: str = "exhaustive",
    mc_samples: int = 1000,
    seed: int = 0,
) -> tuple:
    """Restricted-isometry band check on (s2, s2_g)-sparse supports.

    For each candidate support S the extreme eigenvalues of X_S'X_S/n are
    computed; ok means every one lies in [1/3, 5/3].  Returns
    (ok, worst_lower, worst_upper).  Exhaustive mode enumerates all maximal
    supports (allowed only up to 100k of them); monte-carlo mode samples
    mc_samples supports at random.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if mode == "exhaustive":
        count = _count_supports(partition, s2, s2_g)
        if count > MAX_EXHAUSTIVE_SUPPORTS:
            raise ValueError(
                f"about {count} supports exceed the exhaustive budget "
                f"{MAX_EXHAUSTIVE_SUPPORTS}; use mode='monte-carlo'"
            )
        supports = _iter_supports(partition, s2, s2_g)
    elif mode == "monte-carlo":
        rng = np.random.default_rng(seed)

        def sample():
            for _ in range(mc_samples):
                groups = rng.choice(partition.d, size=min(s2_g, partition.d), replace=False)
                pool = np.concatenate([partition.group_indices(j) for j in groups])
                take = min(s2, pool.size)
                yield rng.choice(pool, size=take, replace=False)

        supports = sample()
    else:
        raise ValueError(f"unknown mode {mode!r}")

    worst_lower = math.inf
    worst_upper = -math.inf
    for S in supports:
        G = X[:, S].T @ X[:, S] / n
        w = np.linalg.eigvalsh(G)
        worst_lower = min(worst_lower, float(w[0]))
        worst_upper = max(worst_upper, float(w[-1]))
    ok = worst_lower >= 1.0 / 3.0 and worst_upper <= 5.0 / 3.0
    return ok, worst_lower, worst_upper


def exact_target(beta_star: GroupedVector, pattern: SparsityPattern) -> GroupedVector:
    """On-support target of the dual certificate.

    Per supported group j: sqrt(s/s_g) * unit direction of the supported part
    of beta* plus the sign pattern; coordinates off T stay zero.
    """
    part = beta_star.partition
    pattern.validate(part)
    if pattern.s == 0:
        raise ValueError("empty support has no certificate target")
    ratio = math.sqrt(pattern.s / pattern.s_g)
    u0 = np.zeros(part.p)
    T_mask = np.zeros(part.p, dtype=bool)
    T_mask[pattern.T_array()] = True
    for j in pattern.G:
        sl = part.group_slice(j)
        bTj = np.where(T_mask[sl], beta_star.values[sl], 0.0)
        nrm = np.linalg.norm(bTj)
        if nrm == 0.0:
            raise ValueError(f"group {j} is in the group support but carries no signal")
        u0[sl] = ratio * bTj / nrm + np.sign(bTj)
    return GroupedVector(u0, part)


def default_batches(n: int, s: int) -> tuple:
    """Row-batch schedule: two quarter-size batches, the rest split evenly."""
    if n < 4:
        raise ValueError("need n >= 4 rows to form batches")
    l_max = math.ceil(math.log(math.e * max(s, 1))) + 2
    n1 = n // 4
    rest = n - 2 * n1
    k = l_max - 2
    base, extra = divmod(rest, k)
    tail = [base + (1 if i < extra else 0) for i in range(k)]
    batches = [n1, n1] + tail
    return tuple(m for m in batches if m >= 1)


def golfing_construct(
    data: Dataset,
    Sigma: Optional[np.ndarray],
    pattern: SparsityPattern,
    beta_star: GroupedVector,
    batches: Sequence[int],
    return_residuals: bool = False,
):
    """Approximate dual certificate from the batched golfing recursion.

    Rows are consumed in order, split into disjoint batches I_l.  Starting
    from the on-support target, each batch contributes
    gamma_l = X_{I_l}' X_{I_l,T} Sigma_TT^{-1} q_{l-1} / n_l and the
    on-support residual q_l shrinks geometrically.  The returned vector is
    the sum of the contributions and lies in the row span of X by
    construction.  Sigma may be the full population covariance, the string
    "identity", or None, in which case the block of rows left over after the
    batches estimates Sigma_TT (a warning flags the substitution).
    """
    batches = tuple(int(m) for m in batches)
    if any(m < 1 for m in batches):
        raise ValueError("every batch needs at least one row")
    if sum(batches) > data.n:
        raise ValueError(f"batches use {sum(batches)} rows but only {data.n} exist")
    T = pattern.T_array()
    X = data.X
    if isinstance(Sigma, str):
        if Sigma != "identity":
            raise ValueError(f"unknown covariance shorthand {Sigma!r}")
        Stt = np.eye(T.size)
    elif Sigma is None:
        leftover = X[sum(batches):]
        if leftover.shape[0] < 2 * max(pattern.s, 1):
            raise ValueError(
                "no population covariance given and too few leftover rows "
                "to estimate Sigma_TT"
            )
        warnings.warn(
            "population covariance unknown; substituting the sample "
            "covariance of the held-out row block",
            stacklevel=2,
        )
        Stt = leftover[:, T].T @ leftover[:, T] / leftover.shape[0]
    else:
        Stt = np.asarray(Sigma, dtype=float)[np.ix_(T, T)]

    u0 = exact_target(beta_star, pattern)
    alpha_T = u0.values[T].copy()
    u = np.zeros(data.p)
    qnorms = []
    start = 0
    for n_l in batches:
        Xl = X[start : start + n_l]
        start += n_l
        core = np.linalg.solve(Stt, alpha_T)
        gamma = Xl.T @ (Xl[:, T] @ core) / n_l
        u += gamma
        alpha_T -= gamma[T]
        qnorms.append(float(np.linalg.norm(alpha_T)))
    result = GroupedVector(u, data.partition)
    if return_residuals:
        return result, qnorms
    return result


def certificate_verify(
    data: Dataset,
    pattern: SparsityPattern,
    beta_star: GroupedVector,
    u: GroupedVector,
    batches: Sequence[int] = (),
) -> CertificateReport:
    """Evaluate the dual-certificate conditions for a supplied u."""
    X = data.X
    n, p = X.shape
    T = pattern.T_array()
    s0 = pattern.s / pattern.s_g

    XT = X[:, T]
    sig_min = float(np.linalg.eigvalsh(XT.T @ XT / n)[0])
    corr = XT.T @ X / n  # s x p
    off = np.ones(p, dtype=bool)
    off[T] = False
    max_corr = float(np.sqrt((corr[:, off] ** 2).sum(axis=0)).max()) if off.any() else 0.0

    u0 = exact_target(beta_star, pattern)
    a_val = float(np.linalg.norm(u.values[T] - u0.values[T])) * max_corr

    in_G = np.zeros(p, dtype=bool)
    for j in pattern.G:
        in_G[data.partition.group_slice(j)] = True
    b_val = 0.0
    for j in range(data.partition.d):
        if j in pattern.G:
            continue
        g = u.values[data.partition.group_slice(j)]
        b_val = max(b_val, float(np.linalg.norm(soft_threshold(g, 0.5))))
    mask_c = in_G & off
    c_val = float(np.abs(u.values[mask_c]).max()) if mask_c.any() else 0.0

    return CertificateReport(
        sigma_min=ConditionCheck.lower(sig_min, 0.5),
        cond_a=ConditionCheck.upper(a_val, 1.0 / 8.0),
        cond_b=ConditionCheck.upper(b_val, math.sqrt(s0) / 2.0),
        cond_c=ConditionCheck.upper(c_val, 0.5),
        u=u,
        batches=tuple(int(m) for m in batches),
    )


def run_certificate_pipeline(
    data: Dataset,
    Sigma: Optional[np.ndarray] = None,
    pattern: Optional[SparsityPattern] = None,
    beta_star: Optional[GroupedVector] = None,
    batches: Optional[Sequence[int]] = None,
) -> CertificateReport:
    """Golfing construction followed by verification, in one call."""
    if beta_star is None:
        if data.beta_truth is None:
            raise ValueError("need beta_star (or a dataset with beta_truth)")
        beta_star = data.beta_truth
    if pattern is None:
        pattern = sparsity_of(beta_star)
    if Sigma is None and data.Sigma is not None:
        Sigma = data.Sigma
    elif Sigma is None and data.meta.get("design") is not None:
        if data.meta["design"].covariance == "identity":
            Sigma = "identity"
    if batches is None:
        batches = default_batches(data.n, pattern.s)
    u = golfing_construct(data, Sigma, pattern, beta_star, batches)
    return certificate_verify(data, pattern, beta_star, u, batches)

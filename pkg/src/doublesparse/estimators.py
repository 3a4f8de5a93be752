"""scikit-learn style estimators wrapping the functional solvers.

Group structure is passed as per-feature integer labels (columns of one
group must be adjacent), a list of group sizes, or a GroupPartition; None
means every feature is its own group, which reduces the group penalty to a
second l1 term.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .groups import Dataset, GroupPartition
from .inference import confidence_intervals, debias, estimate_M
from .solvers import SolveOptions, solve_scaled_sgl, solve_sgl
from .tuning import TuningSpec, cv_select, default_lambdas

__all__ = [
    "SparseGroupLasso",
    "SparseGroupLassoCV",
    "ScaledSparseGroupLasso",
    "DebiasedSparseGroupLasso",
]


def _resolve_partition(groups, n_features: int) -> GroupPartition:
    if groups is None:
        return GroupPartition((1,) * n_features)
    if isinstance(groups, GroupPartition):
        part = groups
    elif np.ndim(groups) == 1 and len(groups) == n_features:
        part = GroupPartition.from_labels(groups)
    else:
        part = GroupPartition(groups)
    if part.p != n_features:
        raise ValueError(
            f"group structure covers {part.p} features, X has {n_features}"
        )
    return part


class SparseGroupLasso(BaseEstimator, RegressorMixin):
    """Linear regression with combined element-wise and group-wise penalties.

    Minimizes ||y - X b||_2^2 + alpha*||b||_1 + alpha_group*||b||_{1,2}.

    Parameters
    ----------
    alpha : float
        Element-wise (l1) penalty weight.
    alpha_group : float
        Group-wise (l_{1,2}) penalty weight.
    groups : array-like or GroupPartition or None
        Per-feature group labels, group sizes, or a partition.
    max_iters, tol_kkt : solver budget and stationarity tolerance
        (tol_kkt=None picks a data-scaled default).

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    n_iter_ : int
    kkt_residual_ : float
    status_ : str
    """

    def __init__(
        self,
        alpha: float = 1.0,
        alpha_group: float = 0.0,
        groups=None,
        max_iters: int = 50_000,
        tol_kkt: Optional[float] = None,
    ):
        self.alpha = alpha
        self.alpha_group = alpha_group
        self.groups = groups
        self.max_iters = max_iters
        self.tol_kkt = tol_kkt

    def _options(self) -> SolveOptions:
        return SolveOptions(max_iters=self.max_iters, tol_kkt=self.tol_kkt)

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        part = _resolve_partition(self.groups, X.shape[1])
        data = Dataset(X=X, y=y, partition=part)
        res = solve_sgl(data, self.alpha, self.alpha_group, self._options())
        self.coef_ = res.beta_hat.values.copy()
        self.n_iter_ = res.iters
        self.kkt_residual_ = res.kkt_residual
        self.objective_ = res.objective
        self.status_ = res.status
        self.partition_ = part
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return X @ self.coef_


class SparseGroupLassoCV(BaseEstimator, RegressorMixin):
    """Sparse group Lasso with the element penalty chosen by K-fold CV.

    The group penalty tracks the element penalty through the fixed ratio
    sqrt(s_target / s_g_target); the grid defaults to 30 log-spaced values
    below 2*||X'y||_inf.
    """

    def __init__(
        self,
        s_target: int = 1,
        s_g_target: int = 1,
        grid=None,
        cv: int = 5,
        seed: int = 0,
    ):
        self.s_target = s_target
        self.s_g_target = s_g_target
        self.grid = grid
        self.cv = cv
        self.seed = seed

    def fit(self, X, y, groups=None):
        X, y = check_X_y(X, y, y_numeric=True)
        part = _resolve_partition(groups, X.shape[1])
        data = Dataset(X=X, y=y, partition=part)
        spec = TuningSpec(
            s_target=self.s_target,
            s_g_target=self.s_g_target,
            cv_folds=self.cv,
            grid=self.grid,
            seed=self.seed,
        )
        lam, lam_g, table = cv_select(data, spec)
        res = solve_sgl(data, lam, lam_g)
        self.alpha_ = lam
        self.alpha_group_ = lam_g
        self.cv_table_ = table
        self.coef_ = res.beta_hat.values.copy()
        self.partition_ = part
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return X @ self.coef_


class ScaledSparseGroupLasso(BaseEstimator, RegressorMixin):
    """Joint estimation of the coefficients and the noise level.

    Alternates the closed-form noise update sigma = ||y - Xb||_2/sqrt(n)
    with penalized fits whose weights scale with sigma; exposes sigma_.
    """

    def __init__(self, alpha: float = 1.0, alpha_group: float = 0.0, groups=None):
        self.alpha = alpha
        self.alpha_group = alpha_group
        self.groups = groups

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        part = _resolve_partition(self.groups, X.shape[1])
        data = Dataset(X=X, y=y, partition=part)
        res, sigma = solve_scaled_sgl(data, self.alpha, self.alpha_group)
        self.coef_ = res.beta_hat.values.copy()
        self.sigma_ = sigma
        self.status_ = res.status
        self.partition_ = part
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return X @ self.coef_


class DebiasedSparseGroupLasso(BaseEstimator, RegressorMixin):
    """Debiased estimate with per-coordinate confidence intervals.

    Fits the penalized estimator (theory-default weights from the sparsity
    targets when alpha is None), corrects it by the estimated inverse
    covariance, and records the variance factors that calibrate the
    intervals.  sigma=None estimates the noise level with the scaled
    estimator.
    """

    def __init__(
        self,
        s_target: int = 1,
        s_g_target: int = 1,
        groups=None,
        sigma: Optional[float] = None,
        C_lambda: float = 1.0,
    ):
        self.s_target = s_target
        self.s_g_target = s_g_target
        self.groups = groups
        self.sigma = sigma
        self.C_lambda = C_lambda

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        part = _resolve_partition(self.groups, X.shape[1])
        data = Dataset(X=X, y=y, partition=part)
        n = data.n
        if self.sigma is None:
            # sigma-free weights: the scaled objective multiplies them by sigma
            lam0, lam0_g = default_lambdas(
                1.0, n, part.d, part.b_max, self.s_target, self.s_g_target,
                self.C_lambda,
            )
            _, sigma = solve_scaled_sgl(data, lam0, lam0_g)
        else:
            sigma = self.sigma
        lam, lam_g = default_lambdas(
            sigma, n, part.d, part.b_max, self.s_target, self.s_g_target,
            self.C_lambda,
        )
        res = solve_sgl(data, lam, lam_g)
        S = X.T @ X / n
        alpha_thr = lam / (n * sigma)
        gamma_thr = np.sqrt(self.s_target / self.s_g_target) * lam / (n * sigma)
        M = estimate_M(S, part, alpha_thr, gamma_thr)
        out = debias(data, res.beta_hat, M, alpha_thr, gamma_thr)
        self.coef_raw_ = res.beta_hat.values.copy()
        self.coef_ = out.beta_u.values.copy()
        self.variances_ = out.variances.copy()
        self.sigma_ = float(sigma)
        self.n_samples_ = n
        self.partition_ = part
        self._debias_result = out
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return X @ self.coef_

    def confidence_intervals(self, level: float = 0.95):
        check_is_fitted(self, "coef_")
        return confidence_intervals(
            self._debias_result, self.sigma_, level, self.n_samples_
        )

"""Theory-driven default penalties and K-fold cross-validation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .groups import Dataset
from .solvers import SolveOptions, _apg, _power_sigma_max

__all__ = [
    "TuningSpec",
    "CVRow",
    "default_lambdas",
    "default_grid",
    "cv_select",
    "cv_table_to_csv",
]


@dataclass
class TuningSpec:
    """Inputs for cross-validated penalty selection.

    The element/group penalty ratio is locked to sqrt(s_target / s_g_target);
    the grid covers the element-wise penalty.  C_lambda rescales the
    theory-driven default formula (the theory leaves the constant free).
    """

    s_target: int
    s_g_target: int
    C_lambda: float = 1.0
    cv_folds: int = 5
    grid: Optional[Sequence[float]] = None  # None: default_grid(data) at fit time
    seed: int = 0

    def __post_init__(self):
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be >= 2")
        if self.s_g_target < 1 or self.s_target < self.s_g_target:
            raise ValueError("need 1 <= s_g_target <= s_target")
        if self.C_lambda <= 0:
            raise ValueError("C_lambda must be > 0")
        if self.grid is not None:
            g = tuple(float(v) for v in self.grid)
            if len(g) == 0:
                raise ValueError("grid must be non-empty")
            if any(v <= 0 for v in g) or any(a <= b for a, b in zip(g, g[1:])):
                raise ValueError("grid must be positive and sorted descending")
            self.grid = g


class CVRow(NamedTuple):
    lambda_: float
    fold_id: int
    mse: float


def default_lambdas(
    sigma: float,
    n: int,
    d: int,
    b: int,
    s: int,
    s_g: int,
    C_lambda: float = 1.0,
) -> tuple:
    """Theory-default penalty pair.

    lam   = C * sigma * sqrt((s*log(e*s_g*b) + s_g*log(e*d/s_g)) * n / s)
    lam_g = sqrt(s/s_g) * lam
    """
    if min(n, d, b, s, s_g) < 1:
        raise ValueError("all counts must be >= 1")
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    if s_g > s:
        raise ValueError("s_g cannot exceed s")
    if s_g > d:
        raise ValueError("s_g cannot exceed d")
    rate = s * math.log(math.e * s_g * b) + s_g * math.log(math.e * d / s_g)
    lam = C_lambda * sigma * math.sqrt(rate * n / s)
    lam_g = math.sqrt(s / s_g) * lam
    return lam, lam_g


def default_grid(data: Dataset, num: int = 30, span: float = 1e-3) -> np.ndarray:
    """Descending log-spaced grid from lambda_max = 2*||X'y||_inf down by `span`."""
    lam_max = 2.0 * float(np.abs(data.X.T @ data.y).max())
    if lam_max <= 0:
        lam_max = 1.0
    return np.geomspace(lam_max, lam_max * span, num)


def _fold_indices(n: int, folds: int, seed: int):
    rng = np.random.default_rng(seed)
    return np.array_split(rng.permutation(n), folds)


def cv_select(
    data: Dataset,
    spec: TuningSpec,
    penalty: str = "sgl",
    opts: Optional[SolveOptions] = None,
) -> tuple:
    """K-fold CV over the penalty grid; returns (lam_best, lam_g_best, cv_table).

    penalty selects which estimator the grid drives: "sgl" ties the group
    penalty to the grid value by the sqrt(s/s_g) ratio, "lasso" leaves it at
    zero, and "group-lasso" moves only the group penalty.  Fits are warm
    started along the descending grid; ties go to the largest penalty.
    """
    if penalty not in ("sgl", "lasso", "group-lasso"):
        raise ValueError(f"unknown penalty {penalty!r}")
    if data.n < spec.cv_folds:
        raise ValueError("need at least cv_folds rows")
    opts = opts or SolveOptions(max_iters=5000, tol_rel_obj=1e-11)

    if spec.grid is not None:
        grid = np.asarray(spec.grid, dtype=float)
    elif penalty == "group-lasso":
        gty = data.partition.group_norms(data.X.T @ data.y)
        lam_max = 2.0 * float(gty.max()) or 1.0
        grid = np.geomspace(lam_max, lam_max * 1e-3, 30)
    else:
        grid = default_grid(data)

    ratio = math.sqrt(spec.s_target / spec.s_g_target)

    def pair(value: float):
        if penalty == "sgl":
            return value, ratio * value
        if penalty == "lasso":
            return value, 0.0
        return 0.0, value

    folds = _fold_indices(data.n, spec.cv_folds, spec.seed)
    for f in folds:
        if f.size == 0:
            raise ValueError("cross-validation produced an empty fold")
    table = []
    errs = np.zeros((grid.size, len(folds)))
    for fid, te in enumerate(folds):
        mask = np.ones(data.n, dtype=bool)
        mask[te] = False
        Xtr, ytr = data.X[mask], data.y[mask]
        Xte, yte = data.X[te], data.y[te]
        smax = _power_sigma_max(Xtr)
        beta = None
        for gi, value in enumerate(grid):
            lam, lam_g = pair(float(value))
            beta, _ = _apg(
                Xtr, ytr, lam, lam_g, data.partition, opts, beta0=beta, sigma_max=smax
            )
            r = yte - Xte @ beta
            errs[gi, fid] = float(r @ r) / te.size
    for gi, value in enumerate(grid):
        for fid in range(len(folds)):
            table.append(CVRow(float(value), fid, float(errs[gi, fid])))
    best = int(np.argmin(errs.mean(axis=1)))  # first minimum = largest penalty
    lam_best, lam_g_best = pair(float(grid[best]))
    return lam_best, lam_g_best, table


def cv_table_to_csv(table, path) -> None:
    """Write CV results with columns lambda, fold_id, mse."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "fold_id", "mse"])
        for row in table:
            w.writerow([f"{row.lambda_:.12g}", row.fold_id, f"{row.mse:.12g}"])

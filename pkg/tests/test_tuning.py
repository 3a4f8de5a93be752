import math

import numpy as np
import pytest

from doublesparse import (
    Dataset,
    GroupPartition,
    TuningSpec,
    cv_select,
    default_grid,
    default_lambdas,
    make_dataset,
    DesignSpec,
    SignalSpec,
)
from doublesparse.tuning import cv_table_to_csv


class TestDefaultLambdas:
    def test_reference_value(self):
        # independent arithmetic evaluation of the closed form
        lam, lam_g = default_lambdas(0.1, 100, 60, 20, 5, 1, 1.0)
        expected = 0.1 * math.sqrt(
            (5 * math.log(20 * math.e) + math.log(60 * math.e)) * 100 / 5
        )
        assert lam == pytest.approx(expected, rel=1e-15)
        assert lam == pytest.approx(2.2393305218297748, rel=1e-12)
        assert lam_g == pytest.approx(math.sqrt(5) * lam, rel=1e-15)

    def test_equal_sparsities_singleton_groups(self):
        lam, lam_g = default_lambdas(1.0, 50, 30, 1, 4, 4)
        assert lam_g == pytest.approx(lam, rel=1e-15)

    def test_sqrt_n_scaling(self):
        lam1, _ = default_lambdas(0.2, 100, 10, 8, 5, 2)
        lam2, _ = default_lambdas(0.2, 200, 10, 8, 5, 2)
        assert lam2 == pytest.approx(math.sqrt(2) * lam1, rel=1e-15)

    def test_zero_counts_rejected(self):
        with pytest.raises(ValueError):
            default_lambdas(0.1, 100, 10, 8, 0, 0)
        with pytest.raises(ValueError):
            default_lambdas(0.1, 0, 10, 8, 5, 1)
        with pytest.raises(ValueError):
            default_lambdas(-0.1, 100, 10, 8, 5, 1)

    def test_monotone_in_sigma_n_d_b(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            sigma = rng.uniform(0.01, 2)
            n = int(rng.integers(10, 500))
            d = int(rng.integers(2, 100))
            b = int(rng.integers(2, 60))
            s_g = int(rng.integers(1, d))
            s = int(rng.integers(s_g, s_g * 3 + 1))
            base, _ = default_lambdas(sigma, n, d, b, s, s_g)
            up_sigma, _ = default_lambdas(sigma * 1.7, n, d, b, s, s_g)
            up_n, _ = default_lambdas(sigma, n + 50, d, b, s, s_g)
            up_d, _ = default_lambdas(sigma, n, d + 5, b, s, s_g)
            up_b, _ = default_lambdas(sigma, n, d, b + 5, s, s_g)
            assert up_sigma > base
            assert up_n > base
            assert up_d > base
            assert up_b > base


class TestTuningSpec:
    def test_grid_must_descend(self):
        with pytest.raises(ValueError):
            TuningSpec(s_target=2, s_g_target=1, grid=(1.0, 2.0))
        with pytest.raises(ValueError):
            TuningSpec(s_target=2, s_g_target=1, grid=())
        with pytest.raises(ValueError):
            TuningSpec(s_target=2, s_g_target=1, cv_folds=1)

    def test_default_grid_span(self):
        rng = np.random.default_rng(1)
        data = Dataset(
            X=rng.standard_normal((10, 6)),
            y=rng.standard_normal(10),
            partition=GroupPartition([3, 3]),
        )
        grid = default_grid(data)
        assert len(grid) == 30
        assert grid[0] == pytest.approx(2 * np.abs(data.X.T @ data.y).max())
        assert grid[-1] == pytest.approx(grid[0] * 1e-3)
        assert np.all(np.diff(grid) < 0)


def _noise_dataset(rng, n=60, d=5, b=4):
    part = GroupPartition.equal(d, b)
    X = rng.standard_normal((n, part.p))
    y = rng.standard_normal(n)
    return Dataset(X=X, y=y, partition=part)


class TestCvSelect:
    def test_single_value_grid_returned(self):
        rng = np.random.default_rng(2)
        data = _noise_dataset(rng)
        spec = TuningSpec(s_target=2, s_g_target=1, grid=(0.7,), cv_folds=3)
        lam, lam_g, table = cv_select(data, spec)
        assert lam == 0.7
        assert lam_g == pytest.approx(math.sqrt(2) * 0.7)

    def test_table_shape_and_finiteness(self):
        rng = np.random.default_rng(3)
        data = _noise_dataset(rng)
        grid = tuple(np.geomspace(10.0, 0.01, 8))
        spec = TuningSpec(s_target=2, s_g_target=1, grid=grid, cv_folds=4)
        _, _, table = cv_select(data, spec)
        lambdas = {row.lambda_ for row in table}
        assert len(lambdas) == len(grid)
        assert len(table) == len(grid) * 4
        assert all(np.isfinite(row.mse) for row in table)

    def test_pure_noise_selects_large_penalty(self):
        # with no signal the best prediction is the all-zero model
        hits = 0
        runs = 100
        for k in range(runs):
            rng = np.random.default_rng(100 + k)
            data = _noise_dataset(rng, n=120, d=4, b=3)
            grid = tuple(default_grid(data, num=12))
            spec = TuningSpec(s_target=2, s_g_target=1, grid=grid, cv_folds=5, seed=k)
            lam, _, _ = cv_select(data, spec)
            if lam >= grid[len(grid) // 4 - 1]:  # largest quartile
                hits += 1
        assert hits >= 80

    def test_beats_grid_minimum_on_signal(self):
        # CV pick should estimate better than the smallest grid penalty
        from doublesparse import solve_sgl

        hits = 0
        runs = 50
        for k in range(runs):
            design = DesignSpec(n=100, d=12, b=10, seed=1000 + k)
            signal = SignalSpec(kind="paper-fixed", s_g=1)
            data = make_dataset(design, signal, sigma=0.1, seed=1000 + k)
            grid = tuple(np.geomspace(
                2 * np.abs(data.X.T @ data.y).max(), 0.05, 10
            ))
            spec = TuningSpec(s_target=5, s_g_target=1, grid=grid, cv_folds=3, seed=k)
            lam, lam_g, _ = cv_select(data, spec)
            picked = solve_sgl(data, lam, lam_g).beta_hat.values
            ratio = math.sqrt(5)
            smallest = solve_sgl(data, grid[-1], ratio * grid[-1]).beta_hat.values
            truth = data.beta_truth.values
            if np.sum((picked - truth) ** 2) <= np.sum((smallest - truth) ** 2):
                hits += 1
        assert hits >= 40

    def test_too_few_rows_rejected(self):
        rng = np.random.default_rng(4)
        part = GroupPartition([2])
        data = Dataset(X=rng.standard_normal((3, 2)), y=np.ones(3), partition=part)
        spec = TuningSpec(s_target=1, s_g_target=1, grid=(1.0,), cv_folds=5)
        with pytest.raises(ValueError):
            cv_select(data, spec)

    def test_csv_serialization(self, tmp_path):
        rng = np.random.default_rng(5)
        data = _noise_dataset(rng)
        spec = TuningSpec(s_target=2, s_g_target=1, grid=(1.0, 0.1), cv_folds=3)
        _, _, table = cv_select(data, spec)
        path = tmp_path / "cv.csv"
        cv_table_to_csv(table, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "lambda,fold_id,mse"
        assert len(lines) == 1 + len(table)

import numpy as np
import pytest
from scipy import stats

from doublesparse import (
    DesignSpec,
    GroupPartition,
    SignalSpec,
    derive_seed,
    generate_design,
    generate_response,
    generate_signal,
    make_dataset,
    sparsity_of,
)


class TestDesignSpec:
    def test_identity_moments(self):
        spec = DesignSpec(n=1000, d=5, b=4, seed=0)
        X = generate_design(spec)
        n = spec.n
        assert np.abs(X.mean(axis=0)).max() <= 4 / np.sqrt(n)
        assert np.abs(X.var(axis=0) - 1.0).max() <= 0.2

    def test_determinism(self):
        spec = DesignSpec(n=50, d=3, b=4, seed=123)
        X1 = generate_design(spec)
        X2 = generate_design(spec)
        assert np.array_equal(X1, X2)
        X3 = generate_design(DesignSpec(n=50, d=3, b=4, seed=124))
        assert not np.array_equal(X1, X3)

    def test_strong_toeplitz_violates_eig_band(self):
        # oracle check: the extreme eigenvalues really leave [2/3, 3/2]
        from scipy.linalg import toeplitz

        w = np.linalg.eigvalsh(toeplitz(0.9 ** np.arange(20)))
        assert w[-1] > 1.5
        with pytest.raises(ValueError):
            DesignSpec(n=10, d=5, b=4, covariance="toeplitz", rho=0.9)

    def test_mild_toeplitz_accepted(self):
        from scipy.linalg import toeplitz

        w = np.linalg.eigvalsh(toeplitz(0.15 ** np.arange(20)))
        assert w[0] >= 2 / 3 and w[-1] <= 3 / 2
        spec = DesignSpec(n=30, d=5, b=4, covariance="toeplitz", rho=0.15)
        X = generate_design(spec)
        # empirical covariance leans toward the population one
        S = X.T @ X / spec.n
        assert abs(np.mean(np.diag(S, 1)) - 0.15) < 0.2

    def test_equicorrelation_band(self):
        with pytest.raises(ValueError):
            DesignSpec(n=10, d=10, b=10, covariance="equicorrelation", rho=0.2)
        DesignSpec(n=10, d=10, b=10, covariance="equicorrelation", rho=0.004)
        DesignSpec(
            n=10, d=10, b=10, covariance="equicorrelation", rho=0.2, assumption1=False
        )

    def test_rademacher_rows(self):
        spec = DesignSpec(n=40, d=2, b=3, rows="rademacher", seed=5)
        X = generate_design(spec)
        assert set(np.unique(X)) == {-1.0, 1.0}

    def test_invalid_specs_rejected(self):
        with pytest.raises(ValueError):
            DesignSpec(n=0, d=2, b=2)
        with pytest.raises(ValueError):
            DesignSpec(n=5, d=2, b=2, covariance="wishart")
        with pytest.raises(ValueError):
            DesignSpec(n=5, d=2, b=2, rows="cauchy")


class TestSignals:
    def test_paper_fixed_two_groups(self):
        part = GroupPartition.equal(100, 30)
        beta = generate_signal(part, SignalSpec(kind="paper-fixed", s_g=2))
        assert np.sum(beta.values**2) == pytest.approx(2 * (1 + 4 + 9 + 16 + 25))
        pat = sparsity_of(beta)
        assert (pat.s, pat.s_g) == (10, 2)

    def test_paper_fixed_single_group_sparsity(self):
        part = GroupPartition.equal(20, 20)
        beta = generate_signal(part, SignalSpec(kind="paper-fixed", s_g=1))
        pat = sparsity_of(beta)
        assert (pat.s, pat.s_g) == (5, 1)

    def test_paper_fixed_needs_wide_groups(self):
        part = GroupPartition.equal(4, 3)
        with pytest.raises(ValueError):
            generate_signal(part, SignalSpec(kind="paper-fixed", s_g=1))

    def test_random_sparse_one_per_group(self):
        part = GroupPartition.equal(8, 6)
        spec = SignalSpec(kind="random-sparse", s=3, s_g=3, amplitude=(0.5, 1.5))
        beta = generate_signal(part, spec, seed=9)
        pat = sparsity_of(beta)
        assert (pat.s, pat.s_g) == (3, 3)
        for j in pat.G:
            assert np.count_nonzero(beta.group(j)) == 1
        mags = np.abs(beta.values[np.asarray(pat.T)])
        assert np.all((0.5 <= mags) & (mags <= 1.5))

    def test_random_sparse_even_spread(self):
        part = GroupPartition.equal(6, 10)
        spec = SignalSpec(kind="random-sparse", s=7, s_g=3, amplitude=1.0)
        beta = generate_signal(part, spec, seed=2)
        pat = sparsity_of(beta)
        assert pat.s == 7 and pat.s_g == 3
        counts = sorted(np.count_nonzero(beta.group(j)) for j in pat.G)
        assert counts == [2, 2, 3]

    def test_infeasible_sparsity_rejected(self):
        part = GroupPartition.equal(4, 2)
        with pytest.raises(ValueError):
            generate_signal(part, SignalSpec(kind="random-sparse", s=5, s_g=2))
        with pytest.raises(ValueError):
            SignalSpec(kind="random-sparse", s=1, s_g=2)


class TestResponses:
    def test_noiseless_is_exact(self):
        rng = np.random.default_rng(0)
        part = GroupPartition.equal(3, 4)
        X = rng.standard_normal((9, 12))
        beta = generate_signal(part, SignalSpec(kind="random-sparse", s=2, s_g=1), 3)
        y = generate_response(X, beta, 0.0)
        assert np.array_equal(y, X @ beta.values)

    def test_noise_level_concentration(self):
        rng_master = np.random.default_rng(1)
        part = GroupPartition.equal(2, 2)
        X = np.zeros((1000, 4))
        beta = generate_signal(part, SignalSpec(kind="random-sparse", s=1, s_g=1), 0)
        hits = 0
        for k in range(100):
            y = generate_response(X, beta, 0.1, seed=int(rng_master.integers(2**32)))
            if 0.008 <= np.mean(y**2) <= 0.012:
                hits += 1
        assert hits >= 95

    def test_null_signal_distribution(self):
        part = GroupPartition([2])
        beta = np.zeros(2)
        from doublesparse import GroupedVector

        y = generate_response(
            np.zeros((4000, 2)), GroupedVector(beta, part), 1.0, seed=11
        )
        assert stats.kstest(y, "norm").pvalue > 0.01

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            generate_response(np.eye(2), np.ones(2), -0.5)


class TestMakeDataset:
    def test_deterministic_and_flagged(self):
        design = DesignSpec(n=30, d=4, b=6, seed=7)
        signal = SignalSpec(kind="paper-fixed", s_g=1)
        d1 = make_dataset(design, signal, sigma=0.1)
        d2 = make_dataset(design, signal, sigma=0.1)
        assert np.array_equal(d1.X, d2.X)
        assert np.array_equal(d1.y, d2.y)
        assert d1.assumption1
        assert d1.sigma_truth == 0.1
        assert d1.meta["seed"] == 7

    def test_replicate_seeds_are_distinct(self):
        a = derive_seed(0, 1, 2).generate_state(2)
        b = derive_seed(0, 1, 3).generate_state(2)
        c = derive_seed(0, 2, 2).generate_state(2)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

import numpy as np
import pytest

from doublesparse import (
    Dataset,
    GroupPartition,
    GroupedVector,
    SparsityPattern,
    is_sparse,
    mixed_norm,
    sparsity_of,
)


@pytest.fixture
def two_by_two():
    return GroupPartition.equal(2, 2)


class TestGroupPartition:
    def test_basic_fields(self):
        part = GroupPartition([3, 1, 2])
        assert part.p == 6
        assert part.d == 3
        assert part.b_max == 3
        assert list(part.starts) == [0, 3, 4]

    def test_group_of_is_total(self):
        part = GroupPartition([3, 1, 2])
        groups = [part.group_of(i) for i in range(part.p)]
        assert groups == [0, 0, 0, 1, 2, 2]

    def test_rejects_empty_and_nonpositive(self):
        with pytest.raises(ValueError):
            GroupPartition([])
        with pytest.raises(ValueError):
            GroupPartition([2, 0, 1])

    def test_from_labels_roundtrip(self):
        part = GroupPartition.from_labels([0, 0, 1, 2, 2, 2])
        assert part.sizes == (2, 1, 3)

    def test_from_labels_rejects_scattered(self):
        with pytest.raises(ValueError):
            GroupPartition.from_labels([0, 1, 0])

    def test_equality_and_hash(self):
        assert GroupPartition([2, 2]) == GroupPartition.equal(2, 2)
        assert hash(GroupPartition([2, 2])) == hash(GroupPartition.equal(2, 2))


class TestMixedNorm:
    def test_single_nonzero_group_12(self, two_by_two):
        v = GroupedVector([3, 4, 0, 0], two_by_two)
        assert mixed_norm(v, 1, 2) == pytest.approx(5.0)

    def test_single_nonzero_group_02(self, two_by_two):
        v = GroupedVector([3, 4, 0, 0], two_by_two)
        assert mixed_norm(v, 0, 2) == 1.0

    def test_inf_2_takes_max_group_norm(self, two_by_two):
        v = GroupedVector([1, -1, 2, 0], two_by_two)
        assert mixed_norm(v, np.inf, 2) == pytest.approx(2.0)

    def test_22_equals_euclidean(self):
        rng = np.random.default_rng(0)
        part = GroupPartition([4, 3, 5])
        for _ in range(20):
            v = GroupedVector(rng.standard_normal(part.p), part)
            assert mixed_norm(v, 2, 2) == pytest.approx(
                np.linalg.norm(v.values), abs=1e-12
            )

    def test_unsupported_orders_rejected(self, two_by_two):
        v = GroupedVector([1, 2, 3, 4], two_by_two)
        with pytest.raises(ValueError):
            mixed_norm(v, 3, 2)
        with pytest.raises(ValueError):
            mixed_norm(v, 1, 0.5)

    def test_norm_ordering_small_d(self):
        rng = np.random.default_rng(1)
        part = GroupPartition([2, 3, 1, 4])
        for _ in range(50):
            v = GroupedVector(rng.standard_normal(part.p), part)
            inf2 = mixed_norm(v, np.inf, 2)
            one2 = mixed_norm(v, 1, 2)
            l2 = mixed_norm(v, 2, 2)
            assert inf2 <= one2 + 1e-12
            assert one2 <= np.sqrt(part.d) * l2 + 1e-12

    def test_12_equals_l1_for_singletons(self):
        rng = np.random.default_rng(2)
        part = GroupPartition([1] * 7)
        v = GroupedVector(rng.standard_normal(7), part)
        assert mixed_norm(v, 1, 2) == pytest.approx(np.abs(v.values).sum())

    def test_02_counts_vs_l0(self):
        part = GroupPartition([3, 3])
        v = GroupedVector([1, 0, 0, 2, 3, 0], part)
        assert mixed_norm(v, 0, 2) <= mixed_norm(v, 0, 1) <= part.p


class TestSparsity:
    def test_paper_signal_pattern(self):
        part = GroupPartition.equal(20, 20)
        beta = np.zeros(part.p)
        beta[:5] = [1, 2, 3, 4, 5]
        pat = sparsity_of(GroupedVector(beta, part))
        assert (pat.s, pat.s_g) == (5, 1)

    def test_zero_vector(self, two_by_two):
        pat = sparsity_of(GroupedVector(np.zeros(4), two_by_two))
        assert (pat.s, pat.s_g) == (0, 0)

    def test_threshold_classifies_ties_as_zero(self, two_by_two):
        v = GroupedVector([1e-9, 0, 0, 1], two_by_two)
        pat = sparsity_of(v, zero_tol=1e-6)
        assert pat.T == (3,)
        assert (pat.s, pat.s_g) == (1, 1)
        # boundary: |v_i| == tol counts as zero
        w = GroupedVector([1e-6, 0, 0, 1], two_by_two)
        assert sparsity_of(w, zero_tol=1e-6).T == (3,)

    def test_negative_tol_rejected(self, two_by_two):
        with pytest.raises(ValueError):
            sparsity_of(GroupedVector(np.zeros(4), two_by_two), zero_tol=-1)

    def test_is_sparse_paper_signal(self):
        part = GroupPartition.equal(10, 20)
        beta = np.zeros(part.p)
        for j in range(2):
            beta[20 * j : 20 * j + 5] = [1, 2, 3, 4, 5]
        v = GroupedVector(beta, part)
        assert is_sparse(v, 10, 2)

    def test_is_sparse_dense_vector(self):
        part = GroupPartition.equal(4, 3)
        v = GroupedVector(np.ones(12), part)
        assert not is_sparse(v, 11, 4)

    def test_is_sparse_zero_vector(self, two_by_two):
        v = GroupedVector(np.zeros(4), two_by_two)
        assert is_sparse(v, 0, 0) and is_sparse(v, 4, 2)

    def test_roundtrip_with_sparsity_of(self):
        rng = np.random.default_rng(3)
        part = GroupPartition([3, 2, 4])
        for _ in range(25):
            vals = rng.standard_normal(part.p) * (rng.random(part.p) < 0.5)
            v = GroupedVector(vals, part)
            pat = sparsity_of(v)
            assert is_sparse(v, pat.s, pat.s_g)

    def test_pattern_validation(self):
        part = GroupPartition([2, 2])
        with pytest.raises(ValueError):
            SparsityPattern(T=(0, 1), G=(), s=2, s_g=0)
        pat = SparsityPattern(T=(0, 3), G=(0, 1), s=2, s_g=2)
        pat.validate(part)
        bad = SparsityPattern(T=(0, 1), G=(0, 1), s=2, s_g=2)
        with pytest.raises(ValueError):
            bad.validate(part)


class TestDataset:
    def test_shape_checks(self, two_by_two):
        X = np.ones((3, 4))
        Dataset(X=X, y=np.ones(3), partition=two_by_two)
        with pytest.raises(ValueError):
            Dataset(X=X, y=np.ones(2), partition=two_by_two)
        with pytest.raises(ValueError):
            Dataset(X=np.ones((3, 5)), y=np.ones(3), partition=two_by_two)

    def test_rejects_nonfinite(self, two_by_two):
        X = np.ones((3, 4))
        X[0, 0] = np.nan
        with pytest.raises(ValueError):
            Dataset(X=X, y=np.ones(3), partition=two_by_two)

    def test_sigma_symmetry_and_eig_band(self, two_by_two):
        X = np.ones((3, 4))
        S = np.eye(4)
        S[0, 1] = 1e-3  # asymmetric
        with pytest.raises(ValueError):
            Dataset(X=X, y=np.ones(3), partition=two_by_two, Sigma=S)
        bad = np.diag([2.0, 1.0, 1.0, 1.0])  # eigenvalue above 3/2
        with pytest.raises(ValueError):
            Dataset(
                X=X, y=np.ones(3), partition=two_by_two, Sigma=bad, assumption1=True
            )
        Dataset(X=X, y=np.ones(3), partition=two_by_two, Sigma=bad)  # unflagged ok

    def test_arrays_frozen(self, two_by_two):
        data = Dataset(X=np.ones((2, 4)), y=np.ones(2), partition=two_by_two)
        with pytest.raises(ValueError):
            data.X[0, 0] = 7.0

import numpy as np
import pytest
from hypothesis import given, strategies as st

from doublesparse import (
    GroupPartition,
    GroupedVector,
    ProxSpec,
    group_soft_threshold,
    mixed_norm,
    soft_threshold,
    sparse_group_prox,
)

from oracles import prox_oracle_2d

finite_floats = st.floats(-1e6, 1e6, allow_nan=False)
small_alphas = st.floats(0.0, 1e3, allow_nan=False)


class TestSoftThreshold:
    def test_paper_value(self):
        assert soft_threshold(3, 1) == pytest.approx(2.0)

    def test_zero_alpha_is_identity(self):
        x = np.array([-3.5, 0.0, 1.25, 7.0])
        np.testing.assert_array_equal(soft_threshold(x, 0.0), x)

    def test_below_threshold_maps_to_zero(self):
        assert soft_threshold(-1, 2) == 0.0

    def test_negative_alpha_rejected(self):
        with pytest.raises(ValueError):
            soft_threshold(1.0, -0.1)

    @given(x=finite_floats, alpha=small_alphas)
    def test_sign_and_magnitude(self, x, alpha):
        out = soft_threshold(x, alpha)
        assert out == 0.0 or np.sign(out) == np.sign(x)
        assert abs(out) == pytest.approx(max(abs(x) - alpha, 0.0), abs=1e-9)

    @given(x=finite_floats, y=finite_floats, alpha=small_alphas)
    def test_nonexpansive(self, x, y, alpha):
        lhs = abs(soft_threshold(x, alpha) - soft_threshold(y, alpha))
        assert lhs <= abs(x - y) + 1e-9 * max(1.0, abs(x), abs(y))

    @given(x=finite_floats, y=finite_floats, a=small_alphas, b=small_alphas)
    def test_triangle_inequality(self, x, y, a, b):
        lhs = abs(soft_threshold(x + y, a + b))
        rhs = abs(soft_threshold(x, a)) + abs(soft_threshold(y, b))
        assert lhs <= rhs + 1e-9 * max(1.0, abs(x), abs(y))

    def test_duality_bound_bulk(self):
        # if ||H_a(x)||_{inf,2} <= b then |<x, y>| <= a*||y||_1 + b*||y||_{1,2}
        rng = np.random.default_rng(0)
        part = GroupPartition([3, 4, 2, 6])
        for _ in range(500):
            x = rng.standard_normal(part.p) * rng.uniform(0.1, 5)
            y = rng.standard_normal(part.p) * rng.uniform(0.1, 5)
            a = rng.uniform(0.0, 2.0)
            hx = GroupedVector(soft_threshold(x, a), part)
            b = mixed_norm(hx, np.inf, 2)
            lhs = abs(float(x @ y))
            rhs = a * np.abs(y).sum() + b * mixed_norm(GroupedVector(y, part), 1, 2)
            assert lhs <= rhs + 1e-9


class TestGroupSoftThreshold:
    def test_norm_equals_threshold_maps_to_zero(self):
        np.testing.assert_array_equal(group_soft_threshold([3, 4], 5.0), [0.0, 0.0])

    def test_zero_alpha_identity(self):
        np.testing.assert_array_equal(group_soft_threshold([3, 4], 0.0), [3.0, 4.0])

    def test_partial_shrink_matches_grid_oracle(self):
        expected, _ = prox_oracle_2d([3.0, 4.0], 0.0, 2.5)
        out = group_soft_threshold([3, 4], 2.5)
        np.testing.assert_allclose(out, expected, atol=2e-5)
        np.testing.assert_allclose(out, [1.5, 2.0], atol=1e-12)

    def test_zero_vector_safe(self):
        np.testing.assert_array_equal(group_soft_threshold([0.0, 0.0], 1.0), [0.0, 0.0])


class TestSparseGroupProx:
    def test_zero_spec_is_identity(self):
        part = GroupPartition([2, 3])
        v = GroupedVector([1, -2, 3, 0, 5], part)
        out = sparse_group_prox(v, ProxSpec(0.0, 0.0))
        np.testing.assert_array_equal(out.values, v.values)

    def test_single_group_matches_grid_oracle(self):
        part = GroupPartition([2])
        v = GroupedVector([3, 4], part)
        out = sparse_group_prox(v, ProxSpec(1.0, 2.5))
        expected, _ = prox_oracle_2d([3.0, 4.0], 1.0, 2.5)
        np.testing.assert_allclose(out.values, expected, atol=2e-5)
        # closed form: soft -> (2,3); scale 1 - 2.5/sqrt(13)
        scale = 1.0 - 2.5 / np.sqrt(13.0)
        np.testing.assert_allclose(out.values, scale * np.array([2.0, 3.0]), atol=1e-12)

    def test_large_element_threshold_kills_everything(self):
        part = GroupPartition([2, 2])
        v = GroupedVector([3, -4, 5, 9], part)
        out = sparse_group_prox(v, ProxSpec(10.0, 0.0))
        np.testing.assert_array_equal(out.values, np.zeros(4))

    def test_invalid_spec_rejected(self):
        with pytest.raises(ValueError):
            ProxSpec(-1.0, 0.0)

    def test_prox_optimality_against_random_perturbations(self):
        # returned point must beat 1000 random competitors on the prox objective
        rng = np.random.default_rng(7)
        part = GroupPartition([3, 2, 4])

        def objective(u, v, le, lg):
            val = 0.5 * np.sum((u - v) ** 2, axis=-1) + le * np.abs(u).sum(axis=-1)
            for j in range(part.d):
                sl = part.group_slice(j)
                val += lg * np.linalg.norm(u[..., sl], axis=-1)
            return val

        for _ in range(20):
            v = rng.standard_normal(part.p) * 3
            le, lg = rng.uniform(0, 2), rng.uniform(0, 2)
            u = sparse_group_prox(GroupedVector(v, part), ProxSpec(le, lg)).values
            w = u + rng.standard_normal((1000, part.p)) * rng.uniform(
                1e-3, 1.0, size=(1000, 1)
            )
            fu = objective(u, v, le, lg)
            fw = objective(w, v, le, lg)
            assert (fu <= fw + 1e-10).all()

    def test_matches_2d_oracle_on_random_instances(self):
        rng = np.random.default_rng(11)
        part = GroupPartition([2])
        for _ in range(25):
            v = rng.uniform(-5, 5, size=2)
            le, lg = rng.uniform(0, 3), rng.uniform(0, 3)
            u = sparse_group_prox(GroupedVector(v, part), ProxSpec(le, lg)).values
            expected, _ = prox_oracle_2d(v, le, lg)
            np.testing.assert_allclose(u, expected, atol=1e-4)

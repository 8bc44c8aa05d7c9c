import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kantorovich.kernels import (DerivativeUnavailableError, Kernel, absolute_moment,
                                 algebraic_moment, bspline_derivative, bspline_eval,
                                 moment_table, verify_kernel_conditions)

U = np.linspace(0.0, 1.0, 2001)


def truncated_power(n, x, q=0):
    """B_n^(q) from the alternating sum of truncated powers (valid for q < n)."""
    x = np.asarray(x, dtype=float)
    total = np.zeros_like(x)
    for k in range(n + 2):
        t = x + (n + 1) / 2 - k
        total += (-1) ** k * math.comb(n + 1, k) * np.where(t > 0, t, 0.0) ** (n - q)
    return total / math.factorial(n - q)


class TestEvaluation:
    @pytest.mark.parametrize("x, expected", [(0.0, 1.0), (0.4999, 1.0), (0.5, 0.0), (-0.5, 1.0)])
    def test_b0_half_open(self, x, expected):
        assert bspline_eval(0, x) == expected

    @pytest.mark.parametrize("degree, x, expected", [
        (1, 0.0, 1.0), (1, 0.5, 0.5), (2, 0.0, 0.75), (2, 1.5, 0.0), (2, 1.0, 0.125),
        (3, 0.0, 2 / 3), (4, 0.0, 115 / 192),
    ])
    def test_known_values(self, degree, x, expected):
        assert bspline_eval(degree, x) == pytest.approx(expected, abs=1e-15)

    @pytest.mark.parametrize("degree", range(1, 7))
    def test_matches_truncated_power_sum(self, degree):
        x = np.linspace(-(degree + 1) / 2 - 0.3, (degree + 1) / 2 + 0.3, 1237)
        assert np.max(np.abs(bspline_eval(degree, x) - truncated_power(degree, x))) < 1e-12

    @pytest.mark.parametrize("degree, q", [(d, q) for d in range(2, 7) for q in range(1, d)])
    def test_derivatives_match_truncated_power_sum(self, degree, q):
        x = np.linspace(-(degree + 1) / 2, (degree + 1) / 2, 977)
        assert np.max(np.abs(bspline_derivative(degree, q, x) - truncated_power(degree, x, q))) < 1e-11

    def test_derivative_examples(self):
        assert bspline_derivative(2, 1, 0.5) == pytest.approx(-1.0)
        assert bspline_derivative(4, 2, 0.0) == pytest.approx(-1.25)

    @pytest.mark.parametrize("degree", range(0, 5))
    def test_support_and_symmetry(self, degree):
        r = (degree + 1) / 2
        x = np.linspace(0, r + 1, 301)
        assert np.all(bspline_eval(degree, x[x > r]) == 0.0)
        inner = x[x < r - 1e-9]
        if degree > 0:
            assert np.allclose(bspline_eval(degree, inner), bspline_eval(degree, -inner), atol=1e-15)

    def test_scalar_and_array_types(self):
        assert isinstance(bspline_eval(2, 0.1), float)
        assert bspline_eval(2, np.zeros((2, 3))).shape == (2, 3)

    def test_derivative_beyond_degree_raises(self):
        with pytest.raises(DerivativeUnavailableError):
            bspline_derivative(2, 3, 0.0)
        with pytest.raises(DerivativeUnavailableError):
            Kernel(2, max_derivative=1)(0.0, 2)

    def test_negative_degree(self):
        with pytest.raises(ValueError):
            Kernel(-1)


class TestMoments:
    @pytest.mark.parametrize("degree", range(0, 7))
    def test_partition_of_unity(self, degree):
        assert np.max(np.abs(algebraic_moment(degree, 0, 0, U) - 1.0)) < 1e-12

    @pytest.mark.parametrize("degree", range(1, 7))
    def test_first_moment_vanishes(self, degree):
        assert np.max(np.abs(algebraic_moment(degree, 0, 1, U))) < 1e-12

    @pytest.mark.parametrize("degree", range(2, 7))
    def test_second_moment_is_variance(self, degree):
        # sum of degree + 1 independent uniforms on [-1/2, 1/2]
        assert np.allclose(algebraic_moment(degree, 0, 2, U), (degree + 1) / 12, atol=1e-12)

    @pytest.mark.parametrize("degree, q", [(d, q) for d in range(1, 7) for q in range(1, d + 1)])
    def test_derivative_kernel_zero_sum(self, degree, q):
        assert np.max(np.abs(algebraic_moment(degree, q, 0, U))) < 1e-10

    @pytest.mark.parametrize("degree, q", [(d, q) for d in range(1, 7) for q in range(1, d + 1)])
    def test_derivative_kernel_moment_of_own_order(self, degree, q):
        # sum_k (k - u)^q chi^(q)(u - k) = q! from differentiating the moment identities
        assert np.allclose(algebraic_moment(degree, q, q, U), math.factorial(q), atol=1e-9)

    @pytest.mark.parametrize("degree", range(1, 6))
    def test_constancy_through_degree_only(self, degree):
        table = moment_table(degree, degree + 1, samples=1001)
        assert max(table.deviation(r) for r in range(degree + 1)) < 1e-10
        assert table.deviation(degree + 1) > 1e-6

    def test_absolute_moment_examples(self):
        assert absolute_moment(1, 0, 1) == pytest.approx(0.5)
        assert absolute_moment(0, 0, 0) == pytest.approx(1.0)
        assert absolute_moment(2, 0, 2) == pytest.approx(0.25, abs=1e-6)

    @given(st.integers(0, 6), st.floats(-50, 50, allow_nan=False))
    @settings(max_examples=200, deadline=None)
    def test_partition_of_unity_anywhere(self, degree, u):
        assert abs(algebraic_moment(degree, 0, 0, u) - 1.0) < 1e-12

    def test_table_shapes(self):
        table = moment_table(3, 2, max_level=1, samples=101)
        assert set(table.algebraic) == {(r, q) for r in range(3) for q in range(2)}
        assert table.mean(0) == pytest.approx(1.0)

    def test_table_level_beyond_kernel(self):
        with pytest.raises(DerivativeUnavailableError):
            moment_table(1, 1, max_level=2)


class TestKernelConditions:
    @pytest.mark.parametrize("degree", range(0, 7))
    def test_bsplines_are_kernels(self, degree):
        report = verify_kernel_conditions(degree, 4, samples=1001)
        assert report.ok
        assert len(report.absolute_moments) == 5

    def test_report_flags_large_deviation(self):
        report = verify_kernel_conditions(2, 1, tolerance=0.0, samples=101)
        assert not report.ok

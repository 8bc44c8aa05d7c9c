import numpy as np
import pytest

from kantorovich.expr import Field
from kantorovich.grids import GridSpec
from kantorovich.kernels import DerivativeUnavailableError, Kernel
from kantorovich.operator import OperatorParams, evaluate_operator
from kantorovich.simultaneous import (DerivativeRequest, derivative_on_grid,
                                      evaluate_derivative_operator, expansion_terms,
                                      finite_difference_operator_derivative, leading_term_on_grid)

from conftest import EX1, EX2


def close(a, b, rel=1e-5, abs_floor=1e-7):
    return abs(a - b) <= max(rel * abs(a), abs_floor)


class TestRequest:
    def test_scalar_q(self):
        req = DerivativeRequest(1, 2)
        assert req.q == (2,) and req.order == 3 and req.alpha == (1, 2)

    def test_negative(self):
        with pytest.raises(ValueError):
            DerivativeRequest(-1, (0,))

    def test_order_above_n(self):
        with pytest.raises(ValueError):
            DerivativeRequest(1, (1,)).check(OperatorParams(1, 2.0))

    def test_kernel_too_rough(self):
        with pytest.raises(DerivativeUnavailableError):
            DerivativeRequest(2, (0,)).check(OperatorParams(2, 2.0, phi=Kernel(1)))

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            DerivativeRequest(0, (0, 0)).check(OperatorParams(0, 2.0))


class TestExpansion:
    def test_zero_request_is_the_operator(self):
        params = OperatorParams(2, 7.0)
        field = Field(EX1, 1, 2)
        req = DerivativeRequest(0, (0,))
        for pt in [(0.3, 0.4), (-1.2, 1.9)]:
            assert evaluate_derivative_operator(params, field, req, pt) == evaluate_operator(params, field, pt)

    def test_term_count(self):
        # (a, b) in {0,1}^2, inner orders 1, 2, 2, 3 -> 3 + 6 + 6 + 10 Taylor terms
        terms = expansion_terms(OperatorParams(3, 2.0, phi=Kernel(4)), DerivativeRequest(1, (1,)))
        assert len(terms) == 25
        assert all(sum(t.alpha) <= 3 for t in terms)

    def test_leading_block(self):
        terms = expansion_terms(OperatorParams(3, 2.0, phi=Kernel(4)), DerivativeRequest(1, (1,)), True)
        assert all(t.kernel_orders == (0, 0) for t in terms) and len(terms) == 3

    @pytest.mark.parametrize("n, degree, req", [
        (1, 2, DerivativeRequest(1, (0,))), (1, 2, DerivativeRequest(0, (1,))),
        (2, 3, DerivativeRequest(1, (1,))), (2, 3, DerivativeRequest(2, (0,))),
        (2, 3, DerivativeRequest(0, (2,))), (3, 4, DerivativeRequest(1, (1,))),
        (3, 4, DerivativeRequest(2, (1,))), (3, 5, DerivativeRequest(3, (0,))),
        (3, 5, DerivativeRequest(1, (2,))), (3, 5, DerivativeRequest(0, (3,))),
    ])
    @pytest.mark.parametrize("text", [EX1, EX2])
    def test_matches_finite_differences(self, n, degree, req, text):
        field = Field(text, 1, n)
        rng = np.random.default_rng(n * 10 + req.p)
        for _ in range(3):
            w = float(rng.uniform(2, 12))
            pt = rng.uniform(-2, 2, 2)
            params = OperatorParams(n, w, phi=Kernel(degree))
            expanded = evaluate_derivative_operator(params, field, req, pt)
            fd = finite_difference_operator_derivative(params, field, req, pt)
            assert close(expanded, fd), (w, pt, expanded, fd)

    def test_three_axes(self):
        params = OperatorParams(2, 4.0, d=2, phi=Kernel(3), psi=(Kernel(3), Kernel(2)))
        field = Field("sin(x)*y1*exp(y2)", 2, 2)
        req = DerivativeRequest(1, (0, 1))
        pt = (0.3, -0.2, 0.5)
        assert close(evaluate_derivative_operator(params, field, req, pt),
                     finite_difference_operator_derivative(params, field, req, pt))

    def test_example_two_true_and_leading_errors(self):
        grid = GridSpec.square(-4, 4, 201)
        field = Field(EX2, 1, 3)
        req = DerivativeRequest(1, (1,))
        exact = field(*grid.mesh(), alpha=(1, 1))
        params = OperatorParams(3, 7.0, phi=Kernel(4))
        full = np.max(np.abs(derivative_on_grid(params, field, req, grid).values - exact))
        lead = np.max(np.abs(leading_term_on_grid(params, field, req, grid).values - exact))
        assert lead == pytest.approx(0.0151, rel=0.05)
        assert full < lead / 10


class TestFiniteDifference:
    def test_zero_order_is_operator_value(self):
        params = OperatorParams(1, 5.0)
        field = Field(EX2, 1, 1)
        req = DerivativeRequest(0, (0,))
        pt = (0.25, 0.75)
        assert finite_difference_operator_derivative(params, field, req, pt, extended=False) == \
            evaluate_operator(params, field, pt)

    def test_constant_field(self):
        params = OperatorParams(1, 5.0)
        fd = finite_difference_operator_derivative(params, Field("3", 1, 1), DerivativeRequest(1, (0,)),
                                                   (0.1, 0.2))
        assert abs(fd) < 1e-8

    def test_bad_step(self):
        with pytest.raises(ValueError):
            finite_difference_operator_derivative(OperatorParams(1, 5.0), Field("x", 1, 1),
                                                  DerivativeRequest(1, (0,)), (0, 0), step=0.0)

    def test_double_precision_variant(self):
        params = OperatorParams(2, 4.0, phi=Kernel(3))
        field = Field(EX1, 1, 2)
        req = DerivativeRequest(1, (1,))
        pt = (0.4, 0.8)
        assert close(evaluate_derivative_operator(params, field, req, pt),
                     finite_difference_operator_derivative(params, field, req, pt, extended=False))


def test_derivative_error_decreases_with_rate():
    grid = GridSpec.square(-4, 4, 101)
    field = Field(EX2, 1, 3)
    req = DerivativeRequest(1, (1,))
    exact = field(*grid.mesh(), alpha=(1, 1))
    errs = [np.max(np.abs(derivative_on_grid(OperatorParams(3, w, phi=Kernel(4)), field, req, grid).values
                          - exact)) for w in (3.0, 7.0, 12.0)]
    assert errs[0] > errs[1] > errs[2]

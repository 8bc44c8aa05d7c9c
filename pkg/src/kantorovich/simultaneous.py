"""Partial derivatives of the Hermite-type Kantorovich operator.

Differentiating ``K_{n,w} f`` under the sum splits every mixed derivative into
a binomial sum: ``a`` time derivatives (``b_i`` space derivatives) land on the
kernel and contribute ``w^a`` (``w^{b_i}``), the rest land on the Taylor
monomials, which turns the order-``n`` sum over ``d^beta f`` into an order
``n - (p + |q| - a - |b|)`` sum over derivatives of ``d^{p-a, q-b} f``:

    d^{p,q} K_n f = sum_{a <= p, b <= q} C(p,a) C(q,b) w^{a+|b|}
                    K_{n'}^{phi^(a), psi^(b)} (d^{p-a, q-b} f).

All terms of the expansion are passed to the shared lattice engine together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .expr import Field, multi_indices
from .grids import Surface, as_axes
from .kernels import DerivativeUnavailableError
from .operator import OperatorParams, Term, evaluate_terms, operator_terms


@dataclass(frozen=True)
class DerivativeRequest:
    """The mixed partial ``d^p/dx^p d^q/dy^q``; ``q`` has one entry per space axis."""

    p: int
    q: tuple[int, ...]

    def __post_init__(self):
        q = (self.q,) if isinstance(self.q, int) else tuple(int(v) for v in self.q)
        object.__setattr__(self, "q", q)
        if self.p < 0 or any(v < 0 for v in q):
            raise ValueError("derivative orders must be non-negative")

    @property
    def order(self) -> int:
        return self.p + sum(self.q)

    @property
    def alpha(self) -> tuple[int, ...]:
        return (self.p, *self.q)

    def check(self, params: OperatorParams) -> None:
        if len(self.q) != params.d:
            raise ValueError(f"q needs {params.d} entries, got {len(self.q)}")
        if self.order > params.n:
            raise ValueError(f"derivative order {self.order} exceeds n = {params.n}")
        for kern, level in zip(params.kernels, self.alpha):
            if level > kern.max_derivative:
                raise DerivativeUnavailableError(
                    f"{kern} cannot supply derivative order {level}")


def _binom_multi(top, bottom) -> int:
    return math.prod(math.comb(t, b) for t, b in zip(top, bottom))


def expansion_terms(params: OperatorParams, req: DerivativeRequest,
                    leading_only: bool = False) -> list[Term]:
    """The product terms of the binomial expansion of ``d^{p,q} K_n f``.

    With ``leading_only`` only the ``a = 0, b = 0`` block is returned, that is
    ``K_{n - p - |q|}`` applied to ``d^{p,q} f`` with the original kernels.
    """
    req.check(params)
    top = req.alpha
    terms = []
    for low in product(*(range(t + 1) for t in top)):
        if leading_only and any(low):
            continue
        rest = tuple(t - s for t, s in zip(top, low))
        inner = params.n - sum(rest)
        scale = _binom_multi(top, low) * params.w ** sum(low)
        for beta in multi_indices(inner, params.d + 1):
            fact = math.prod(math.factorial(b) for b in beta)
            alpha = tuple(r + b for r, b in zip(rest, beta))
            terms.append(Term(scale / fact, alpha, low, beta))
    return terms


def derivative_on_grid(params: OperatorParams, field: Field, req: DerivativeRequest,
                       grid, leading_only: bool = False) -> Surface:
    """``d^{p,q} K_n f`` at every node of ``grid``."""
    axes = as_axes(grid)
    terms = expansion_terms(params, req, leading_only)
    return Surface(axes, evaluate_terms(params, field, axes, terms))


def evaluate_derivative_operator(params: OperatorParams, field: Field,
                                 req: DerivativeRequest, point) -> float:
    """``d^{p,q} K_n f`` at one point."""
    axes = tuple(np.array([float(c)]) for c in point)
    return float(evaluate_terms(params, field, axes, expansion_terms(params, req)).ravel()[0])


def leading_term_on_grid(params: OperatorParams, field: Field, req: DerivativeRequest,
                         grid) -> Surface:
    """``K_{n-p-|q|}`` applied to ``d^{p,q} f``, the ``a = b = 0`` block alone."""
    return derivative_on_grid(params, field, req, grid, leading_only=True)


def default_step(order: int) -> float:
    """Central-difference step: 1e-4 up to second order, larger beyond."""
    return 1e-4 if order <= 2 else 4e-4


def _stencil(order: int, h, dtype):
    h = dtype(h)
    offsets = np.array([(dtype(order) / 2 - i) * h for i in range(order + 1)], dtype=dtype)
    weights = np.array([(-1) ** i * math.comb(order, i) for i in range(order + 1)], dtype=dtype)
    return offsets, weights / h ** order


def finite_difference_operator_derivative(params: OperatorParams, field: Field,
                                          req: DerivativeRequest, point,
                                          step: float | None = None,
                                          extended: bool = True) -> float:
    """Tensor central differences of ``K_n f`` approximating ``d^{p,q} K_n f``.

    Each axis carrying derivative order ``r`` uses the ``r + 1`` point stencil
    ``sum_i (-1)^i C(r, i) K(x + (r/2 - i) h) / h^r``; all stencil nodes are
    evaluated as one tensor grid. With ``extended`` the operator is evaluated
    in ``np.longdouble``, which keeps the ``eps / h^r`` cancellation error of
    third-order stencils below the truncation error.
    """
    dtype = np.longdouble if extended else np.float64
    if len(req.q) != params.d:
        raise ValueError(f"q needs {params.d} entries, got {len(req.q)}")
    h = default_step(req.order) if step is None else float(step)
    if not h > 0:
        raise ValueError("step must be positive")
    axes, weights = [], []
    for c, r in zip(point, req.alpha):
        off, wts = _stencil(r, h, dtype)
        axes.append(dtype(c) + off)
        weights.append(wts)
    values = evaluate_terms(params, field, axes, operator_terms(params))
    for axis in range(len(axes) - 1, -1, -1):
        values = np.tensordot(values, weights[axis], axes=([axis], [0]))
    return float(values)

"""Hermite-type sampling Kantorovich operators on ``R x R^d``.

For kernels ``phi, psi_1..psi_d`` and rate ``w`` the operator is

    K f(x, y) = sum_{k, m} phi(w x - k) prod_i psi_i(w y_i - m_i)
                * sum_{|beta| <= n} 1/beta! * w^{d+1} int_{cell(k, m)}
                  d^beta f(u, v) (x - u)^beta_0 prod_i (y_i - v_i)^beta_i du dv

with unit-``1/w`` cells. Cell integrals use tensorised Gauss-Legendre rules.

Evaluation on a tensor grid goes through :func:`evaluate_terms`: field
derivatives are sampled once on the lattice of all quadrature nodes the grid
touches, then contracted one axis at a time against per-axis tables of
``weight * kernel value * monomial``. Every output value is produced by the same
fixed sequence of elementwise operations whatever the grid size or ordering,
so a point evaluated alone matches the same point inside any grid bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .expr import Field, multi_indices
from .grids import Surface, as_axes
from .kernels import DerivativeUnavailableError, Kernel, verify_kernel_conditions


class KernelConditionError(ValueError):
    pass


@lru_cache(maxsize=None)
def _kernel_ok(degree: int, n: int) -> bool:
    return verify_kernel_conditions(Kernel(degree), n, 1e-12, samples=1001).ok


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes and weights mapped to ``[0, 1]``."""

    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def gauss_legendre(cls, count: int) -> "QuadratureRule":
        if count < 1:
            raise ValueError("quadrature needs at least one node")
        x, wts = np.polynomial.legendre.leggauss(count)
        return cls((x + 1.0) / 2.0, wts / 2.0)

    def __len__(self):
        return len(self.nodes)


@dataclass(frozen=True)
class Cell:
    """The box ``[k/w, (k+1)/w] x prod_i [m_i/w, (m_i+1)/w]``."""

    k: int
    m: tuple[int, ...]

    def box(self, w: float):
        return [(i / w, (i + 1) / w) for i in (self.k, *self.m)]


@dataclass(frozen=True)
class OperatorParams:
    """One operator instance ``K_{n,w}^{phi,psi}``.

    ``psi`` defaults to ``d`` copies of ``phi``. ``compensated`` switches the
    accumulation to Neumaier summation.
    """

    n: int
    w: float
    d: int = 1
    phi: Kernel = field(default_factory=lambda: Kernel(2))
    psi: tuple[Kernel, ...] = ()
    quad_nodes: int = 5
    compensated: bool = False

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"order n must be non-negative, got {self.n}")
        if not self.w > 0:
            raise ValueError(f"sampling rate w must be positive, got {self.w}")
        if self.d < 1:
            raise ValueError(f"dimension d must be positive, got {self.d}")
        if self.quad_nodes < 1:
            raise ValueError("quad_nodes must be at least 1")
        phi = self.phi if isinstance(self.phi, Kernel) else Kernel(int(self.phi))
        psi = tuple(k if isinstance(k, Kernel) else Kernel(int(k)) for k in self.psi)
        if not psi:
            psi = (phi,) * self.d
        if len(psi) != self.d:
            raise ValueError(f"need {self.d} space kernels, got {len(psi)}")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "w", float(self.w))
        for kern in self.kernels:
            if not _kernel_ok(kern.degree, self.n):
                raise KernelConditionError(f"{kern} is not a kernel of order {self.n}")

    @property
    def kernels(self) -> tuple[Kernel, ...]:
        return (self.phi, *self.psi)

    @property
    def quadrature(self) -> QuadratureRule:
        return _rule(self.quad_nodes)

    def with_order(self, n: int) -> "OperatorParams":
        return OperatorParams(n, self.w, self.d, self.phi, self.psi, self.quad_nodes,
                              self.compensated)

    def with_rate(self, w: float) -> "OperatorParams":
        return OperatorParams(self.n, w, self.d, self.phi, self.psi, self.quad_nodes,
                              self.compensated)

    def taylor_terms(self):
        """``(beta, 1/beta!)`` for every multi-index with ``|beta| <= n``."""
        return _taylor_terms(self.n, self.d)


@lru_cache(maxsize=None)
def _rule(count: int) -> QuadratureRule:
    return QuadratureRule.gauss_legendre(count)


@lru_cache(maxsize=None)
def _taylor_terms(n: int, d: int):
    return tuple((beta, 1.0 / math.prod(math.factorial(b) for b in beta))
                 for beta in multi_indices(n, d + 1))


def active_indices(kernel: Kernel, w: float, coord: float) -> range:
    """Integers ``k`` with ``w * coord - k`` inside the closed kernel support."""
    if not w > 0:
        raise ValueError("w must be positive")
    t = w * coord
    return range(math.ceil(t - kernel.radius), math.floor(t + kernel.radius) + 1)


def cell_integral(field: Field, l: int, j: Sequence[int], cell: Cell, eval_point,
                  params: OperatorParams) -> float:
    """``w^{d+1}`` times the quadrature of ``d^{(l,j)} f (x-u)^l (y-v)^j`` over ``cell``."""
    j = tuple(j)
    if l + sum(j) > params.n:
        raise ValueError(f"l + |j| = {l + sum(j)} exceeds n = {params.n}")
    rule = params.quadrature
    w = params.w
    point = tuple(float(c) for c in eval_point)
    exps = (l, *j)
    nodes, weights = [], []
    for (lo, _), e, c in zip(cell.box(w), exps, point):
        u = lo + rule.nodes / w
        nodes.append(u)
        weights.append(rule.weights * (c - u) ** e)
    mesh = np.meshgrid(*nodes, indexing="ij")
    values = np.asarray(field(*mesh, alpha=exps))
    wmesh = np.ones_like(values)
    for axis, wt in enumerate(weights):
        shape = [1] * len(weights)
        shape[axis] = -1
        wmesh = wmesh * wt.reshape(shape)
    # w^{d+1} * (1/w)^{d+1} from the node map cancels
    return float(np.sum(values * wmesh))


@dataclass(frozen=True)
class Term:
    """One product term: ``coef * sum_cells prod_axes kernel^(orders) * integral``.

    ``alpha`` is the field derivative multi-index and ``exponents`` the monomial
    powers ``(x - u)^e_0 (y_i - v_i)^e_i``.
    """

    coef: float
    alpha: tuple[int, ...]
    kernel_orders: tuple[int, ...]
    exponents: tuple[int, ...]


class _Axis:
    """Per-axis slot layout and cached coefficient tables."""

    def __init__(self, coords, kernel: Kernel, w: float, rule: QuadratureRule, pad: int):
        self.coords = coords
        self.kernel = kernel
        self.w = w
        self.rule = rule
        t = w * coords
        self.scaled = t
        self.base = np.ceil(t - kernel.radius).astype(np.int64) - pad
        self.slots = kernel.degree + 2 + 2 * pad
        self.kmin = int(self.base.min())
        kmax = int(self.base.max()) + self.slots - 1
        ks = np.arange(self.kmin, kmax + 1).astype(coords.dtype)
        self.lattice = ((ks[:, None] + rule.nodes[None, :]) / w).ravel()
        self._kernel_values = {}
        self._tables = {}

    def kernel_values(self, order: int):
        vals = self._kernel_values.get(order)
        if vals is None:
            vals = [self.kernel(self.scaled - (self.base + s), order) for s in range(self.slots)]
            self._kernel_values[order] = vals
        return vals

    def table(self, order: int, exponent: int):
        key = (order, exponent)
        tab = self._tables.get(key)
        if tab is None:
            Q = len(self.rule)
            kv = self.kernel_values(order)
            tab = []
            for s in range(self.slots):
                k = self.base + s
                row = (k - self.kmin) * Q
                kf = k.astype(self.coords.dtype)
                for q in range(Q):
                    u = (kf + self.rule.nodes[q]) / self.w
                    coef = self.rule.weights[q] * kv[s]
                    if exponent:
                        coef = coef * (self.coords - u) ** exponent
                    tab.append((coef, row + q))
            self._tables[key] = tab
        return tab


def _accumulate(total, comp, value, compensated):
    if not compensated:
        return total + value, comp
    t = total + value
    comp = comp + np.where(np.abs(total) >= np.abs(value), (total - t) + value, (value - t) + total)
    return t, comp


def evaluate_terms(params: OperatorParams, field: Field, axes, terms: Sequence[Term],
                   pad: int = 0) -> np.ndarray:
    """Sum of ``terms`` on the tensor grid spanned by ``axes``.

    ``pad`` widens the scanned index interval on both sides of every axis; the
    extra cells carry zero kernel weight and leave the result unchanged.
    """
    axes = as_axes(axes)
    if len(axes) != params.d + 1:
        raise ValueError(f"need {params.d + 1} axes, got {len(axes)}")
    rule = params.quadrature
    lay = [_Axis(c, kern, params.w, rule, pad) for c, kern in zip(axes, params.kernels)]
    lattice_mesh = None
    lattice = {}
    shape = tuple(len(c) for c in axes)
    dtype = np.result_type(*axes)
    total = np.zeros(shape, dtype)
    comp = np.zeros(shape, dtype)
    for term in terms:
        for kern, order in zip(params.kernels, term.kernel_orders):
            if order > kern.max_derivative:
                raise DerivativeUnavailableError(
                    f"{kern} cannot supply derivative order {order}")
        values = lattice.get(term.alpha)
        if values is None:
            if lattice_mesh is None:
                lattice_mesh = np.meshgrid(*(a.lattice for a in lay), indexing="ij")
            values = np.broadcast_to(field(*lattice_mesh, alpha=term.alpha),
                                     lattice_mesh[0].shape)
            lattice[term.alpha] = values
        block = values
        for axis in range(params.d, -1, -1):
            tab = lay[axis].table(term.kernel_orders[axis], term.exponents[axis])
            bshape = [1] * block.ndim
            bshape[axis] = -1
            acc = None
            for coef, idx in tab:
                piece = np.take(block, idx, axis=axis) * coef.reshape(bshape)
                acc = piece if acc is None else acc + piece
            block = acc
        total, comp = _accumulate(total, comp, term.coef * block, params.compensated)
    return total + comp if params.compensated else total


def operator_terms(params: OperatorParams) -> list[Term]:
    zeros = (0,) * (params.d + 1)
    return [Term(c, beta, zeros, beta) for beta, c in params.taylor_terms()]


def evaluate_on_grid(params: OperatorParams, field: Field, grid, pad: int = 0) -> Surface:
    """``K f`` at every node of ``grid`` (a :class:`GridSpec` or coordinate arrays)."""
    axes = as_axes(grid)
    return Surface(axes, evaluate_terms(params, field, axes, operator_terms(params), pad))


def evaluate_operator(params: OperatorParams, field: Field, point, pad: int = 0) -> float:
    """``K f`` at a single point ``(x, y_1, ..., y_d)``."""
    point = tuple(float(c) for c in point)
    if not all(math.isfinite(c) for c in point):
        raise ValueError("evaluation point must be finite")
    axes = tuple(np.array([c]) for c in point)
    return float(evaluate_terms(params, field, axes, operator_terms(params), pad).ravel()[0])


def evaluate_points(params: OperatorParams, field: Field, points) -> np.ndarray:
    """``K f`` at scattered points, one point at a time."""
    return np.array([evaluate_operator(params, field, p) for p in points])

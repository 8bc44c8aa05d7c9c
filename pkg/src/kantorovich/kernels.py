"""Centered cardinal B-spline kernels and their discrete moments.

The B-spline of degree ``n`` is stored as ``n + 1`` polynomial pieces, one per
unit interval of its support ``[-(n+1)/2, (n+1)/2]``, each written in the
local coordinate ``t in [0, 1)``. Piece coefficients are derived once per
degree with exact rational arithmetic from the convolution recurrence

    B_n(x) = int_{x-1/2}^{x+1/2} B_{n-1}(s) ds,

so evaluation is a plain Horner loop. Values at knots are right-hand limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

DEFAULT_MOMENT_SAMPLES = 10_001


class DerivativeUnavailableError(ValueError):
    """Requested kernel derivative exceeds the piecewise-polynomial smoothness."""


Pieces = tuple[tuple[Fraction, ...], ...]


def _integrate(coeffs: tuple[Fraction, ...]) -> tuple[Fraction, ...]:
    # antiderivative vanishing at t = 0
    return (Fraction(0),) + tuple(c / (i + 1) for i, c in enumerate(coeffs))


def _peval(coeffs, t):
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * t + c
    return acc


def _padd(a, b, sign=1):
    size = max(len(a), len(b))
    a = tuple(a) + (Fraction(0),) * (size - len(a))
    b = tuple(b) + (Fraction(0),) * (size - len(b))
    return tuple(x + sign * y for x, y in zip(a, b))


@lru_cache(maxsize=None)
def bspline_pieces(degree: int) -> Pieces:
    """Exact rational piece coefficients of ``B_degree`` (lowest order first)."""
    if degree < 0:
        raise ValueError(f"degree must be non-negative, got {degree}")
    if degree == 0:
        return ((Fraction(1),),)
    prev = bspline_pieces(degree - 1)
    zero = (Fraction(0),)
    pieces = []
    for j in range(degree + 1):
        # left endpoint x - 1/2 falls in piece j-1 of B_{n-1}, right in piece j
        left = prev[j - 1] if j >= 1 else zero
        right = prev[j] if j < degree else zero
        int_left = _integrate(left)
        int_right = _integrate(right)
        # int_t^1 left + int_0^t right
        total_left = _peval(int_left, Fraction(1))
        poly = _padd(_padd((total_left,), int_left, -1), int_right)
        pieces.append(poly)
    return tuple(pieces)


@lru_cache(maxsize=None)
def bspline_derivative_pieces(degree: int, q: int) -> Pieces:
    """Pieces of the ``q``-th derivative of ``B_degree``.

    Uses ``B_n'(x) = B_{n-1}(x + 1/2) - B_{n-1}(x - 1/2)`` applied ``q`` times,
    so the result lives on the same ``degree + 1`` unit pieces as ``B_degree``.
    """
    if q < 0:
        raise ValueError("derivative order must be non-negative")
    if q > degree:
        raise DerivativeUnavailableError(
            f"B_{degree} has classical derivatives only up to order {degree}, got {q}")
    if q == 0:
        return bspline_pieces(degree)
    # the (q-1)-th derivative of B_{n-1} is laid out on degree pieces
    lower = bspline_derivative_pieces(degree - 1, q - 1)
    zero = (Fraction(0),)
    pieces = []
    for j in range(degree + 1):
        plus = lower[j] if j < degree else zero
        minus = lower[j - 1] if j >= 1 else zero
        pieces.append(_padd(plus, minus, -1))
    return tuple(pieces)


@lru_cache(maxsize=None)
def _float_table(degree: int, q: int) -> np.ndarray:
    pieces = bspline_derivative_pieces(degree, q)
    width = max(len(p) for p in pieces)
    table = np.zeros((degree + 1, width))
    for j, p in enumerate(pieces):
        table[j, : len(p)] = [float(c) for c in p]
    table.setflags(write=False)
    return table


def _evaluate_pieces(degree: int, q: int, x) -> np.ndarray:
    table = _float_table(degree, q)
    x = np.asarray(x)
    x = x.astype(np.result_type(x.dtype, np.float64), copy=False)
    shifted = x + (degree + 1) / 2
    idx = np.floor(shifted)
    inside = (idx >= 0) & (idx <= degree)
    t = shifted - idx
    rows = table[np.where(inside, idx, 0).astype(np.intp)]
    acc = np.zeros_like(t)
    for c in range(table.shape[1] - 1, -1, -1):
        acc = acc * t + rows[..., c]
    return np.where(inside, acc, 0.0)


def bspline_eval(degree: int, x):
    """Centered cardinal B-spline of the given degree at ``x``.

    Exactly zero outside ``[-(degree+1)/2, (degree+1)/2)``. Scalar input gives a
    Python float, array input an ndarray of the same shape.
    """
    out = _evaluate_pieces(degree, 0, x)
    return float(out) if out.ndim == 0 else out


def bspline_derivative(degree: int, q: int, x):
    """``q``-th derivative of ``B_degree`` at ``x`` (right-hand limit at knots)."""
    out = _evaluate_pieces(degree, q, x)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Kernel:
    """A centered cardinal B-spline kernel ``B_degree``."""

    degree: int
    max_derivative: int = field(default=-1)

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError(f"degree must be non-negative, got {self.degree}")
        if self.max_derivative < 0:
            object.__setattr__(self, "max_derivative", self.degree)
        if self.max_derivative > self.degree:
            raise DerivativeUnavailableError(
                f"B_{self.degree} cannot supply derivatives of order {self.max_derivative}")

    @property
    def radius(self) -> float:
        """Half-width of the support."""
        return (self.degree + 1) / 2

    def __call__(self, x, q: int = 0):
        if q > self.max_derivative:
            raise DerivativeUnavailableError(
                f"kernel B_{self.degree} supplies derivatives up to {self.max_derivative}, got {q}")
        return bspline_derivative(self.degree, q, x)

    def __str__(self):
        return f"B_{self.degree}"


def _as_kernel(kernel) -> Kernel:
    return kernel if isinstance(kernel, Kernel) else Kernel(int(kernel))


def _shifts(kernel: Kernel, u: np.ndarray):
    # integers k with u - k inside the support, as offsets from a per-u base
    base = np.ceil(u - kernel.radius)
    return base, kernel.degree + 2


def algebraic_moment(kernel, q: int, r: int, u):
    """Discrete algebraic moment ``sum_k (k - u)^r chi^(q)(u - k)``."""
    kernel = _as_kernel(kernel)
    u_arr = np.asarray(u, dtype=float)
    base, count = _shifts(kernel, u_arr)
    total = np.zeros_like(u_arr)
    for s in range(count):
        k = base + s
        total = total + (k - u_arr) ** r * kernel(u_arr - k, q)
    return float(total) if total.ndim == 0 else total


def _absolute_sum(kernel: Kernel, q: int, alpha: float, u: np.ndarray) -> np.ndarray:
    base, count = _shifts(kernel, u)
    total = np.zeros_like(u)
    for s in range(count):
        k = base + s
        total = total + np.abs(u - k) ** alpha * np.abs(kernel(u - k, q))
    return total


def absolute_moment(kernel, q: int, alpha: float, samples: int = DEFAULT_MOMENT_SAMPLES) -> float:
    """Discrete absolute moment ``sup_u sum_k |u-k|^alpha |chi^(q)(u-k)|``.

    The summand is 1-periodic in ``u``, so the supremum is taken over a uniform
    grid of ``samples`` points on ``[0, 1]``. The result is a lower bound that
    converges as the grid is refined.
    """
    kernel = _as_kernel(kernel)
    u = np.linspace(0.0, 1.0, samples)
    return float(np.max(_absolute_sum(kernel, q, alpha, u)))


@dataclass
class MomentTable:
    """Algebraic and absolute moments of one kernel.

    ``algebraic[(r, q)]`` is ``(mean over u, max deviation from the mean)`` and
    ``absolute[(alpha, q)]`` the grid supremum ``M_alpha(chi^(q))``.
    """

    kernel: Kernel
    algebraic: dict[tuple[int, int], tuple[float, float]]
    absolute: dict[tuple[int, int], float]
    sample_count: int

    def mean(self, r: int, q: int = 0) -> float:
        return self.algebraic[(r, q)][0]

    def deviation(self, r: int, q: int = 0) -> float:
        return self.algebraic[(r, q)][1]

    def M(self, alpha: int, q: int = 0) -> float:
        return self.absolute[(alpha, q)]


def moment_table(kernel, max_order: int, max_level: int = 0,
                 samples: int = DEFAULT_MOMENT_SAMPLES) -> MomentTable:
    """Moments of orders ``0..max_order`` for derivative levels ``0..max_level``."""
    kernel = _as_kernel(kernel)
    if max_level > kernel.max_derivative:
        raise DerivativeUnavailableError(
            f"{kernel} supplies derivatives up to {kernel.max_derivative}, got {max_level}")
    u = np.linspace(0.0, 1.0, samples)
    algebraic = {}
    absolute = {}
    for q in range(max_level + 1):
        for r in range(max_order + 1):
            values = algebraic_moment(kernel, q, r, u)
            mean = float(np.mean(values))
            algebraic[(r, q)] = (mean, float(np.max(np.abs(values - mean))))
            absolute[(r, q)] = float(np.max(_absolute_sum(kernel, q, r, u)))
    return MomentTable(kernel, algebraic, absolute, samples)


@dataclass(frozen=True)
class KernelReport:
    kernel: Kernel
    order: int
    partition_deviation: float
    absolute_moments: tuple[float, ...]
    tolerance: float

    @property
    def finite(self) -> bool:
        return all(math.isfinite(m) for m in self.absolute_moments)

    @property
    def ok(self) -> bool:
        return self.partition_deviation < self.tolerance and self.finite


def verify_kernel_conditions(kernel, n: int, tolerance: float = 1e-12,
                             samples: int = DEFAULT_MOMENT_SAMPLES) -> KernelReport:
    """Check partition of unity on a ``u`` grid and finiteness of ``M_0..M_n``."""
    kernel = _as_kernel(kernel)
    u = np.linspace(0.0, 1.0, samples)
    deviation = float(np.max(np.abs(algebraic_moment(kernel, 0, 0, u) - 1.0)))
    moments = tuple(float(np.max(_absolute_sum(kernel, 0, beta, u))) for beta in range(n + 1))
    return KernelReport(kernel, n, deviation, moments, tolerance)

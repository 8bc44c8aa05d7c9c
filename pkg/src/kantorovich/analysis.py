"""Error measurement, a priori bounds and asymptotic constants.

Sup norms of field derivatives and moduli of continuity are taken over a
finite window sampled on a grid, since the test fields are unbounded on the
whole plane. Every such quantity is therefore a grid lower bound of the
corresponding global supremum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from itertools import product
from typing import Callable, Sequence

import numpy as np

from .expr import Field, multi_indices
from .grids import GridMismatchError, GridSpec, Surface, as_axes
from .kernels import DEFAULT_MOMENT_SAMPLES, Kernel, MomentTable, moment_table
from .operator import OperatorParams, evaluate_on_grid
from .simultaneous import DerivativeRequest, derivative_on_grid, leading_term_on_grid

MOMENT_GATE = 1e-10
SLOPE_FLOOR = 1e-12


class NonConstantMomentsError(ValueError):
    """Algebraic moments needed by an asymptotic formula depend on ``u``."""


# ------------------------------------------------------------------ errors

def sup_error(a: Surface, b, grid=None) -> float:
    """Largest absolute difference between ``a`` and ``b`` over ``a``'s grid.

    ``b`` may be a :class:`Surface` on the same grid, or a callable (for
    instance a :class:`Field`) sampled at ``a``'s nodes. ``grid``, when given,
    must be the grid ``a`` was computed on.
    """
    if grid is not None and not _axes_equal(a.axes, as_axes(grid)):
        raise GridMismatchError("surface was not sampled on the given grid")
    if not isinstance(b, Surface):
        b = Surface.sample(b, a.axes)
    return float(np.max(np.abs((a - b).values)))


def _axes_equal(x, y) -> bool:
    return len(x) == len(y) and all(np.array_equal(p, q) for p, q in zip(x, y))


def derivative_sup_norms(field: Field, alphas, window) -> dict[tuple[int, ...], float]:
    """``max |d^alpha f|`` over the nodes of ``window`` for each multi-index."""
    mesh = np.meshgrid(*as_axes(window), indexing="ij")
    out = {}
    for alpha in alphas:
        alpha = tuple(alpha)
        values = np.broadcast_to(field(*mesh, alpha=alpha), mesh[0].shape)
        out[alpha] = float(np.max(np.abs(values)))
    return out


def kernel_reach(params: OperatorParams) -> float:
    """Distance from an evaluation point to the farthest quadrature node used."""
    return (max(k.radius for k in params.kernels) + 1.0) / params.w


# ------------------------------------------------------ modulus of continuity

class ModulusEstimator:
    """Empirical modulus of continuity of ``d^alpha f`` on a fixed probe set.

    Pairs are ``(z, z + h)`` with anchors ``z`` on the grid nodes and
    displacements ``h`` drawn once, uniformly from the box
    ``|h_0| < reach_0, |h_i| < reach_i`` (plus its near-corners). For given
    radii only displacements strictly inside the radii count, so the estimate
    is nondecreasing in every radius.
    """

    def __init__(self, field: Field, alpha, grid, reach: Sequence[float], probes: int = 64,
                 seed: int = 42):
        if probes < 1:
            raise ValueError("probes must be positive")
        reach = np.asarray(reach, dtype=float)
        if np.any(reach <= 0):
            raise ValueError("reach must be positive")
        dims = len(reach)
        self.alpha = tuple(alpha)
        self.reach = reach
        rng = np.random.default_rng(seed)
        corners = np.array(list(product((-1.0, 1.0), repeat=dims))) * (1 - 1e-12)
        unit = np.vstack([corners, rng.uniform(-1.0, 1.0, size=(probes, dims))])
        self.offsets = unit * reach
        axes = as_axes(grid)
        if len(axes) != dims:
            raise ValueError(f"grid has {len(axes)} axes, reach has {dims}")
        mesh = np.meshgrid(*axes, indexing="ij")
        base = np.broadcast_to(field(*mesh, alpha=self.alpha), mesh[0].shape)
        self.differences = np.empty(len(self.offsets))
        for i, h in enumerate(self.offsets):
            moved = np.broadcast_to(field(*(m + s for m, s in zip(mesh, h)), alpha=self.alpha),
                                    mesh[0].shape)
            self.differences[i] = np.max(np.abs(moved - base))
        self.resolution = tuple(float(np.min(np.diff(a))) for a in axes)

    def __call__(self, radii: Sequence[float]) -> float:
        radii = np.asarray(radii, dtype=float)
        inside = np.all(np.abs(self.offsets) < radii, axis=1)
        return float(np.max(self.differences[inside], initial=0.0))


def modulus_of_continuity(field: Field, alpha, delta: float, gammas, grid,
                          probes: int = 64, seed: int = 42) -> float:
    """Lower estimate of ``omega(d^alpha f, delta, gamma_1, ..., gamma_d)``.

    The supremum of ``|g(x, y) - g(t, s)|`` over ``|x - t| < delta`` and
    ``|y_i - s_i| < gamma_i`` is searched over grid anchors and ``probes``
    seeded random displacements plus the corners of the neighbourhood.
    """
    gammas = (gammas,) if np.isscalar(gammas) else tuple(gammas)
    radii = (float(delta), *map(float, gammas))
    if any(r <= 0 for r in radii):
        raise ValueError("delta and gammas must be positive")
    est = ModulusEstimator(field, alpha, grid, radii, probes, seed)
    return est(radii)


def brute_force_modulus(fn: Callable, radii: Sequence[float], grid, steps: int = 8) -> float:
    """Dense-pair search: every anchor against a ``(2 steps + 1)^dims`` offset lattice."""
    axes = as_axes(grid)
    mesh = np.meshgrid(*axes, indexing="ij")
    base = np.broadcast_to(fn(*mesh), mesh[0].shape)
    best = 0.0
    ticks = [np.linspace(-r, r, 2 * steps + 1) * (1 - 1e-12) for r in radii]
    for h in product(*ticks):
        moved = np.broadcast_to(fn(*(m + s for m, s in zip(mesh, h))), mesh[0].shape)
        best = max(best, float(np.max(np.abs(moved - base))))
    return best


# ------------------------------------------------------------------ moments

@lru_cache(maxsize=None)
def _moments(degree: int, max_order: int, max_level: int, samples: int) -> MomentTable:
    return moment_table(Kernel(degree), max_order, max_level, samples)


def kernel_moments(kernel: Kernel, max_order: int, max_level: int = 0,
                   samples: int = DEFAULT_MOMENT_SAMPLES) -> MomentTable:
    """Cached :func:`moment_table` for a kernel."""
    return _moments(kernel.degree, max_order, max_level, samples)


def _factorial(beta) -> int:
    return math.prod(math.factorial(b) for b in beta)


def _scale(value: float, w: float, power: int) -> float:
    # repeated division keeps bound(w) / bound(2w) an exact power of two
    for _ in range(power):
        value /= w
    return value


# ------------------------------------------------------------------ bounds

def well_definedness_bound(field: Field, params: OperatorParams, window,
                           pad: float | None = None) -> float:
    """Pointwise bound on ``|K f|`` from the sup norms of ``d^beta f``, ``|beta| <= n``.

    Sup norms are taken over ``window`` widened by ``pad`` (default: the
    kernel reach), which covers every quadrature node the operator reads for
    points inside the window.
    """
    d = params.d
    pad = kernel_reach(params) if pad is None else pad
    region = window.padded(pad) if pad > 0 else window
    betas = list(multi_indices(params.n, d + 1))
    norms = derivative_sup_norms(field, betas, region)
    tables = [kernel_moments(k, params.n) for k in params.kernels]
    total = 0.0
    for beta in betas:
        prod = math.prod(t.M(b) + t.M(0) for t, b in zip(tables, beta))
        term = 2.0 ** (sum(beta) - (d + 1)) * norms[beta] * prod / _factorial(beta)
        total += _scale(term, params.w, sum(beta))
    return total


def bound_thm2iii(field: Field, params: OperatorParams, window,
                  tables: Sequence[MomentTable] | None = None, pad: float = 0.0) -> float:
    """Bound ``T_n(w)`` on ``||K_n f - f||`` through the order ``n + 1`` derivatives.

    ``2^{n-d} / w^{n+1} * sum_{|beta| = n+1} ||d^beta f|| / beta!
    * prod_axes (M_{beta_i} + M_0)``, sup norms over ``window`` (widened by ``pad``).
    """
    n, d = params.n, params.d
    if tables is None:
        tables = [kernel_moments(k, n + 1) for k in params.kernels]
    region = window.padded(pad) if pad > 0 else window
    betas = list(multi_indices(n + 1, d + 1, exact=True))
    norms = derivative_sup_norms(field, betas, region)
    total = 0.0
    for beta in betas:
        prod = math.prod(t.M(b) + t.M(0) for t, b in zip(tables, beta))
        total += norms[beta] * prod / _factorial(beta)
    return _scale(2.0 ** (n - d) * total, params.w, n + 1)


def _smoothness_factor(table: MomentTable, l: int, level: int = 0) -> float:
    return table.M(l + 1, level) + 2 * table.M(l, level) + table.M(1, level) + 2 * table.M(0, level)


def bound_thm2ii(field: Field, params: OperatorParams, window,
                 tables: Sequence[MomentTable] | None = None, probes: int = 64,
                 seed: int = 42) -> float:
    """Bound on ``||K_n f - f||`` through moduli of continuity of the order-``n`` derivatives.

    ``2^{n-(d+1)} / w^n * sum_{|beta| = n} omega(d^beta f, 1/w) / beta!
    * prod_axes (M_{beta_i+1} + 2 M_{beta_i} + M_1 + 2 M_0)``.
    """
    n, d, w = params.n, params.d, params.w
    if tables is None:
        tables = [kernel_moments(k, n + 1) for k in params.kernels]
    radii = (1.0 / w,) * (d + 1)
    total = 0.0
    for beta in multi_indices(n, d + 1, exact=True):
        omega = ModulusEstimator(field, beta, window, radii, probes, seed)(radii)
        prod = math.prod(_smoothness_factor(t, b) for t, b in zip(tables, beta))
        total += omega * prod / _factorial(beta)
    return _scale(2.0 ** (n - (d + 1)) * total, w, n)


def bound_thm5(field: Field, params: OperatorParams, req: DerivativeRequest, window,
               probes: int = 64, seed: int = 42) -> float:
    """Bound on ``||d^{p,q} K_n f - d^{p,q} f||``.

    Binomial sum over the kernel-derivative split ``(a, b)`` of
    ``2^{n'-(d+1)} sum_{|beta| = n'} omega(d^{beta + rest} f, 1/w) / beta!
    * prod_axes (M_{beta_i+1} + 2 M_{beta_i} + M_1 + 2 M_0)(chi_i^{(s_i)})``,
    with ``n' = n - |rest|``, all scaled by ``w^{-(n - p - |q|)}``.
    """
    req.check(params)
    n, d, w = params.n, params.d, params.w
    top = req.alpha
    tables = [kernel_moments(k, n + 1, t) for k, t in zip(params.kernels, top)]
    radii = (1.0 / w,) * (d + 1)
    omegas: dict[tuple[int, ...], float] = {}
    total = 0.0
    for low in product(*(range(t + 1) for t in top)):
        rest = tuple(t - s for t, s in zip(top, low))
        inner = n - sum(rest)
        binom = math.prod(math.comb(t, s) for t, s in zip(top, low))
        block = 0.0
        for beta in multi_indices(inner, d + 1, exact=True):
            alpha = tuple(b + r for b, r in zip(beta, rest))
            if alpha not in omegas:
                omegas[alpha] = ModulusEstimator(field, alpha, window, radii, probes, seed)(radii)
            prod = math.prod(_smoothness_factor(t, b, s) for t, b, s in zip(tables, beta, low))
            block += omegas[alpha] * prod / _factorial(beta)
        total += binom * 2.0 ** (inner - (d + 1)) * block
    return _scale(total, w, n - req.order)


# ------------------------------------------------------ asymptotic constants

def _gated_means(kernel: Kernel, max_order: int, level: int) -> list[float]:
    table = kernel_moments(kernel, max_order, level)
    worst = max(table.deviation(r, level) for r in range(max_order + 1))
    if worst >= MOMENT_GATE:
        raise NonConstantMomentsError(
            f"moments of {kernel} (derivative level {level}) up to order {max_order} vary "
            f"with u by {worst:.3g}")
    return [table.mean(r, level) for r in range(max_order + 1)]


def _inner_constant(field: Field, point, order: int, levels, means, rest) -> float:
    # sum over |beta| = order + 1 of the moment-weighted derivatives at point
    d1 = len(levels)
    total = 0.0
    for beta in multi_indices(order + 1, d1, exact=True):
        weight = 1.0
        for b, m in zip(beta, means):
            weight *= sum(math.comb(b, c) * m[c] / (b - c + 1) for c in range(b + 1))
        if weight == 0.0:
            continue
        alpha = tuple(b + r for b, r in zip(beta, rest))
        total += (-1) ** order * weight / _factorial(beta) * float(field(*point, alpha=alpha))
    return total


def voronovskaja_constant(field: Field, params: OperatorParams, point) -> float:
    """Limit of ``w^{n+1} (K_n f - f)`` at ``point`` for constant-moment kernels.

    Raises
    ------
    NonConstantMomentsError
        If any moment of order ``<= n + 1`` varies with ``u`` by ``1e-10`` or more.
    """
    n = params.n
    means = [_gated_means(k, n + 1, 0) for k in params.kernels]
    zeros = (0,) * (params.d + 1)
    return _inner_constant(field, point, n, zeros, means, zeros)


def voronovskaja_constant_derivative(field: Field, params: OperatorParams,
                                     req: DerivativeRequest, point) -> float:
    """Limit of ``w^{n-p-|q|+1} (d^{p,q} K_n f - d^{p,q} f)`` at ``point``.

    The binomial split ``(a, b)`` of the derivative uses the moments of the
    differentiated kernels and the sign ``(-1)^{n'}`` with ``n' = n - |rest|``.
    """
    req.check(params)
    n = params.n
    top = req.alpha
    total = 0.0
    for low in product(*(range(t + 1) for t in top)):
        rest = tuple(t - s for t, s in zip(top, low))
        inner = n - sum(rest)
        means = [_gated_means(k, inner + 1, s) for k, s in zip(params.kernels, low)]
        binom = math.prod(math.comb(t, s) for t, s in zip(top, low))
        total += binom * _inner_constant(field, point, inner, low, means, rest)
    return total


def richardson_limit(ws: Sequence[float], values: Sequence[float], rate: float = 1.0) -> float:
    """Extrapolate ``g(w) = L + c w^{-rate}`` from the two largest ``w``."""
    (w1, g1), (w2, g2) = sorted(zip(ws, values))[-2:]
    s1, s2 = w1 ** rate, w2 ** rate
    return (s2 * g2 - s1 * g1) / (s2 - s1)


# ------------------------------------------------------------------ sweeps

@dataclass
class ErrorReport:
    """Measured sup-error at one rate ``w`` together with the applicable bounds."""

    w: float
    measured_error: float
    grid: GridSpec
    n: int = 0
    bound_thm2iii: float | None = None
    bound_thm2ii: float | None = None
    bound_thm5: float | None = None
    leading_error: float | None = None

    def dominated(self) -> bool:
        bounds = [b for b in (self.bound_thm2iii, self.bound_thm2ii, self.bound_thm5)
                  if b is not None]
        return all(self.measured_error <= b for b in bounds)


@dataclass
class SweepResult:
    reports: list[ErrorReport]
    slope: float
    partial_slopes: list[float] = dc_field(default_factory=list)

    @property
    def errors(self) -> list[float]:
        return [r.measured_error for r in self.reports]


def loglog_slope(ws: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of ``log E`` against ``log w``; NaN with fewer than two usable points.

    Errors at or below ``1e-12`` are dropped before fitting.
    """
    pts = [(math.log(w), math.log(e)) for w, e in zip(ws, errors) if e > SLOPE_FLOOR]
    if len(pts) < 2:
        return math.nan
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    x = x - x.mean()
    return float(np.dot(x, y - y.mean()) / np.dot(x, x))


def error_report(field: Field, params: OperatorParams, grid,
                 req: DerivativeRequest | None = None, bounds: bool = True,
                 probes: int = 64, seed: int = 42, exact: Surface | None = None) -> ErrorReport:
    """Sup-error of ``K_n f`` (or of ``d^{p,q} K_n f`` when ``req`` is given) at one rate.

    In the derivative case the error of the leading block of the expansion is
    reported alongside the full one.
    """
    if exact is None:
        alpha = None if req is None else req.alpha
        exact = Surface.sample(lambda *m: field(*m, alpha=alpha), grid)
    if req is None:
        surface = evaluate_on_grid(params, field, grid)
    else:
        surface = derivative_on_grid(params, field, req, grid)
    report = ErrorReport(params.w, sup_error(surface, exact), grid, params.n)
    if req is not None:
        lead = leading_term_on_grid(params, field, req, grid)
        report.leading_error = sup_error(lead, exact)
    if bounds:
        if req is None:
            report.bound_thm2iii = bound_thm2iii(field, params, grid)
            report.bound_thm2ii = bound_thm2ii(field, params, grid, probes=probes, seed=seed)
        else:
            report.bound_thm5 = bound_thm5(field, params, req, grid, probes, seed)
    return report


def convergence_sweep(field: Field, template: OperatorParams, ws: Sequence[float], grid,
                      req: DerivativeRequest | None = None, bounds: bool = True,
                      probes: int = 64, seed: int = 42) -> SweepResult:
    """Error reports along increasing rates ``ws`` and the fitted log-log slope.

    ``partial_slopes[i]`` is the fit over the first ``i + 1`` rates.
    """
    ws = [float(w) for w in ws]
    if len(ws) < 3 or any(b <= a for a, b in zip(ws, ws[1:])):
        raise ValueError("w-list must be strictly increasing with at least 3 entries")
    alpha = None if req is None else req.alpha
    exact = Surface.sample(lambda *m: field(*m, alpha=alpha), grid)
    reports = [error_report(field, template.with_rate(w), grid, req, bounds, probes, seed, exact)
               for w in ws]
    errors = [r.measured_error for r in reports]
    partial = [loglog_slope(ws[: i + 1], errors[: i + 1]) for i in range(len(ws))]
    return SweepResult(reports, loglog_slope(ws, errors), partial)

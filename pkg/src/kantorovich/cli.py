"""Command-line experiment runner.

Each subcommand reads an optional YAML config, applies flag overrides,
validates the result into an :class:`ExperimentConfig`, runs it, prints one
summary line per result and writes CSV when ``--out`` is given.

Exit codes: 0 success, 2 parse error (flags, config file or expression),
3 invalid configuration, 4 numerical gate failure, 5 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import math
import sys
from dataclasses import dataclass
from typing import Any, Sequence

import yaml

from .analysis import (NonConstantMomentsError, error_report, kernel_moments, loglog_slope,
                       voronovskaja_constant)
from .expr import ExprError, Field, parse
from .grids import GridSpec, Surface
from .kernels import DerivativeUnavailableError, Kernel
from .operator import KernelConditionError, OperatorParams, evaluate_on_grid, evaluate_operator
from .simultaneous import DerivativeRequest

EXIT_OK, EXIT_PARSE, EXIT_INVALID, EXIT_GATE, EXIT_IO = 0, 2, 3, 4, 5

BUILTIN_FIELDS = {
    "paper-ex1": "(1+x)*y/(1+x^2)",
    "paper-ex2": "sin(x)*cos(y)",
}

EXPERIMENTS = ("moments", "approximate", "sweep", "voronovskaja", "simultaneous")


class ConfigParseError(Exception):
    pass


class ConfigError(Exception):
    pass


# ------------------------------------------------------------------ config

@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment description; list-valued fields are tuples."""

    experiment: str
    field: str = "paper-ex1"
    n: tuple[int, ...] = (0,)
    w: tuple[float, ...] = (7.0,)
    d: int = 1
    phi: int = 2
    psi: tuple[int, ...] = ()
    p: int = 0
    q: tuple[int, ...] = ()
    window: tuple[float, ...] = (-2.0, 2.0)
    grid: int = 201
    quad_nodes: int = 5
    seed: int = 42
    probes: int = 64
    bounds: bool = True
    points: tuple[tuple[float, ...], ...] = ()
    degree: int = 2
    max_order: int = 4
    level: int = 0
    out: str | None = None

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = [list(v) if isinstance(v, tuple) else v for v in value]
            out[f.name] = value
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        if "experiment" not in data:
            raise ConfigError("missing required key 'experiment'")
        try:
            values = {k: _coerce(k, v) for k, v in data.items() if v is not None}
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        cfg = cls(**values)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}")
        if self.d < 1:
            raise ConfigError("d must be positive")
        if any(v < 0 for v in self.n):
            raise ConfigError("n must be non-negative")
        if not self.n or not self.w:
            raise ConfigError("n and w need at least one value")
        if any(not (v > 0 and math.isfinite(v)) for v in self.w):
            raise ConfigError("w must be positive")
        if self.grid < 2:
            raise ConfigError("grid needs at least 2 points per axis")
        if self.quad_nodes < 1:
            raise ConfigError("quad_nodes must be at least 1")
        if self.probes < 1:
            raise ConfigError("probes must be positive")
        if self.psi and len(self.psi) != self.d:
            raise ConfigError(f"psi needs {self.d} degrees")
        if min((self.phi, *self.psi)) < 0 or self.degree < 0:
            raise ConfigError("kernel degrees must be non-negative")
        if self.q and len(self.q) != self.d:
            raise ConfigError(f"q needs {self.d} entries")
        if self.p < 0 or any(v < 0 for v in self.q):
            raise ConfigError("derivative orders must be non-negative")
        if len(self.window) not in (2, 2 * (self.d + 1)):
            raise ConfigError("window needs lo,hi or one lo,hi pair per axis")
        pairs = zip(self.window[::2], self.window[1::2])
        if any(not lo < hi for lo, hi in pairs):
            raise ConfigError("window needs lo < hi on every axis")
        for pt in self.points:
            if len(pt) != self.d + 1:
                raise ConfigError(f"points need {self.d + 1} coordinates")
        single = self.experiment in ("approximate", "voronovskaja", "simultaneous")
        if single and len(self.n) != 1:
            raise ConfigError(f"{self.experiment} takes a single n")
        if self.experiment == "approximate" and len(self.w) != 1:
            raise ConfigError("approximate takes a single w")
        if self.experiment == "voronovskaja" and not self.points:
            raise ConfigError("voronovskaja needs at least one point")
        if self.experiment == "simultaneous" and self.p + sum(self.q) > self.n[0]:
            raise ConfigError("p + |q| must not exceed n")
        if self.max_order < 0 or self.level < 0:
            raise ConfigError("max_order and level must be non-negative")

    # derived objects

    @property
    def expression(self) -> str:
        return BUILTIN_FIELDS.get(self.field, self.field)

    @property
    def psi_kernels(self) -> tuple[Kernel, ...]:
        return tuple(Kernel(k) for k in (self.psi or (self.phi,) * self.d))

    @property
    def request(self) -> DerivativeRequest:
        return DerivativeRequest(self.p, self.q or (0,) * self.d)

    def grid_spec(self) -> GridSpec:
        bounds = self.window if len(self.window) > 2 else self.window * (self.d + 1)
        return GridSpec(tuple((lo, hi, self.grid) for lo, hi in zip(bounds[::2], bounds[1::2])))

    def params(self, n: int, w: float) -> OperatorParams:
        return OperatorParams(n, w, self.d, Kernel(self.phi), self.psi_kernels, self.quad_nodes)


_INT_KEYS = {"d", "phi", "p", "grid", "quad_nodes", "seed", "probes", "degree", "max_order", "level"}
_INT_LIST_KEYS = {"n", "psi", "q"}
_FLOAT_LIST_KEYS = {"w", "window"}


def _as_list(value) -> list:
    if isinstance(value, str):
        return [v for v in value.split(",") if v.strip()]
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


def _int(value) -> int:
    if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
        raise ValueError(f"expected an integer, got {value!r}")
    return int(value)


def _coerce(key: str, value):
    if key in _INT_KEYS:
        return _int(value)
    if key in _INT_LIST_KEYS:
        return tuple(_int(v) for v in _as_list(value))
    if key in _FLOAT_LIST_KEYS:
        return tuple(float(v) for v in _as_list(value))
    if key == "points":
        if isinstance(value, str):
            value = [p.split(",") for p in value.split(";") if p.strip()]
        return tuple(tuple(float(c) for c in pt) for pt in value)
    if key == "bounds":
        if isinstance(value, str):
            return value.strip().lower() in ("1", "true", "yes", "on")
        return bool(value)
    return str(value)


def load_config_file(path: str) -> dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigParseError(f"config {path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigParseError(f"config {path}: top level must be a mapping")
    return data


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)


# ------------------------------------------------------------------ output

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    return "%.17g" % value


def write_csv(path: str, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def emit_surface_csv(surface: Surface, path: str) -> None:
    """Header then one row per node, first axis slowest, 17 significant digits."""
    write_csv(path, surface.column_names(), surface.rows())


# ------------------------------------------------------------------ runners

def _field(cfg: ExperimentConfig, order: int) -> Field:
    return Field(cfg.expression, cfg.d, order)


def run_moments(cfg: ExperimentConfig) -> list[tuple]:
    table = kernel_moments(Kernel(cfg.degree), cfg.max_order, cfg.level)
    rows = []
    for level in range(cfg.level + 1):
        for r in range(cfg.max_order + 1):
            mean, dev = table.algebraic[(r, level)]
            rows.append((level, r, mean, dev, table.M(r, level)))
            print(f"B_{cfg.degree} level={level} order={r} m={mean:.10g} "
                  f"deviation={dev:.3g} M={table.M(r, level):.10g}")
    if cfg.out:
        write_csv(cfg.out, ("level", "order", "mean", "deviation", "absolute"), rows)
    return rows


def run_approximate(cfg: ExperimentConfig) -> Surface:
    n, w = cfg.n[0], cfg.w[0]
    field = _field(cfg, n)
    grid = cfg.grid_spec()
    surface = evaluate_on_grid(cfg.params(n, w), field, grid)
    err = float(abs((surface - Surface.sample(field, grid)).values).max())
    print(f"n={n} w={w:g} E={err:.10g} grid={'x'.join(map(str, grid.shape))}")
    if cfg.out:
        emit_surface_csv(surface, cfg.out)
    return surface


def run_sweep(cfg: ExperimentConfig) -> list[tuple]:
    grid = cfg.grid_spec()
    rows = []
    for n in cfg.n:
        field = _field(cfg, n + 1)
        exact = Surface.sample(field, grid)
        ws, errors = [], []
        for w in cfg.w:
            rep = error_report(field, cfg.params(n, w), grid, bounds=cfg.bounds,
                               probes=cfg.probes, seed=cfg.seed, exact=exact)
            ws.append(w)
            errors.append(rep.measured_error)
            partial = loglog_slope(ws, errors)
            rows.append((n, w, rep.measured_error, rep.bound_thm2iii, rep.bound_thm2ii,
                         None if math.isnan(partial) else partial))
            line = f"n={n} w={w:g} E={rep.measured_error:.10g}"
            if cfg.bounds:
                line += f" T={rep.bound_thm2iii:.6g} B={rep.bound_thm2ii:.6g}"
            print(line)
        if len(ws) >= 2:
            print(f"n={n} slope={loglog_slope(ws, errors):.4f}")
    if cfg.out:
        write_csv(cfg.out, ("n", "w", "E", "T_thm2iii", "B_thm2ii", "slope_partial"), rows)
    return rows


def run_voronovskaja(cfg: ExperimentConfig) -> list[tuple]:
    n = cfg.n[0]
    field = _field(cfg, n + 1)
    rows = []
    for pt in cfg.points:
        const = voronovskaja_constant(field, cfg.params(n, cfg.w[0]), pt)
        base = float(field(*pt))
        for w in cfg.w:
            scaled = w ** (n + 1) * (evaluate_operator(cfg.params(n, w), field, pt) - base)
            rows.append((*pt, w, scaled, const))
            coords = ",".join(f"{c:g}" for c in pt)
            print(f"point=({coords}) w={w:g} scaled_residual={scaled:.10g} constant={const:.10g}")
    if cfg.out:
        names = ["x"] + (["y"] if cfg.d == 1 else [f"y{i}" for i in range(1, cfg.d + 1)])
        write_csv(cfg.out, (*names, "w", "scaled_residual", "predicted_constant"), rows)
    return rows


def run_simultaneous(cfg: ExperimentConfig) -> list[tuple]:
    n = cfg.n[0]
    req = cfg.request
    field = _field(cfg, n + 1)
    grid = cfg.grid_spec()
    exact = Surface.sample(lambda *m: field(*m, alpha=req.alpha), grid)
    rows = []
    for w in cfg.w:
        params = cfg.params(n, w)
        rep = error_report(field, params, grid, req, bounds=cfg.bounds, probes=cfg.probes,
                           seed=cfg.seed, exact=exact)
        rows.append((w, rep.measured_error, rep.leading_error, rep.bound_thm5))
        line = f"w={w:g} E={rep.measured_error:.10g} E_leading={rep.leading_error:.10g}"
        if cfg.bounds:
            line += f" B={rep.bound_thm5:.6g}"
        print(line)
    if cfg.out:
        write_csv(cfg.out, ("w", "E", "E_leading", "B_thm5"), rows)
    return rows


RUNNERS = {
    "moments": run_moments,
    "approximate": run_approximate,
    "sweep": run_sweep,
    "voronovskaja": run_voronovskaja,
    "simultaneous": run_simultaneous,
}


def run(cfg: ExperimentConfig) -> int:
    """Execute a validated config and return the process exit status."""
    try:
        if cfg.experiment != "moments":
            parse(cfg.expression, cfg.d)
        RUNNERS[cfg.experiment](cfg)
    except ExprError as exc:
        print(f"error: field expression: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except NonConstantMomentsError as exc:
        print(f"error: numerical gate: {exc}", file=sys.stderr)
        return EXIT_GATE
    except (KernelConditionError, DerivativeUnavailableError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: I/O: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


# ------------------------------------------------------------------ argparse

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_PARSE)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML file with experiment keys")
    common.add_argument("--out", metavar="PATH", help="CSV output path")
    common.add_argument("--grid", type=int, metavar="N", help="points per axis (default 201)")
    common.add_argument("--window", metavar="lo,hi[,lo,hi]", help="evaluation window")
    common.add_argument("--seed", type=int, metavar="S", help="seed for modulus probes (default 42)")
    common.add_argument("--field", help="expression in x, y (y1.. for d > 1) or a builtin name")
    common.add_argument("--n", metavar="N[,N...]", help="operator order(s)")
    common.add_argument("--w", metavar="W[,W...]", help="sampling rate(s)")
    common.add_argument("--d", type=int, help="space dimension (default 1)")
    common.add_argument("--phi", type=int, metavar="K", help="degree of the time kernel B_K")
    common.add_argument("--psi", metavar="K[,K...]", help="degrees of the space kernels")
    common.add_argument("--quad-nodes", type=int, dest="quad_nodes", metavar="Q")
    common.add_argument("--probes", type=int, help="random displacements for moduli")
    common.add_argument("--no-bounds", dest="bounds", action="store_const", const=False,
                        help="skip the a priori bounds")

    parser = _Parser(prog="kantorovich",
                     description="Hermite-type sampling Kantorovich operator experiments.")
    sub = parser.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    mom = sub.add_parser("moments", parents=[common], help="kernel moment table")
    mom.add_argument("--degree", type=int, metavar="K")
    mom.add_argument("--max-order", type=int, dest="max_order", metavar="R")
    mom.add_argument("--level", type=int, metavar="L", help="highest kernel derivative level")
    sub.add_parser("approximate", parents=[common], help="operator surface on a grid")
    sub.add_parser("sweep", parents=[common], help="sup-errors and bounds over n and w")
    vor = sub.add_parser("voronovskaja", parents=[common], help="scaled residuals vs the limit")
    vor.add_argument("--points", metavar="x,y[;x,y...]")
    sim = sub.add_parser("simultaneous", parents=[common], help="derivative sup-errors")
    sim.add_argument("--p", type=int, help="time derivative order")
    sim.add_argument("--q", metavar="Q[,Q...]", help="space derivative orders")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    data: dict[str, Any] = {}
    if args.config:
        data.update(load_config_file(args.config))
    flags = {k: v for k, v in vars(args).items() if k != "config" and v is not None}
    data.update(flags)
    return ExperimentConfig.from_dict(data)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ConfigParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

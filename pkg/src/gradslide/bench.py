"""Sweeps over target accuracies, report files and log-log slope fits."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Sequence

import numpy as np
from scipy.stats import linregress

from .core import ConfigurationError, DomainError, GradslideError, OracleTally
from .gds import solve_gds_known
from .pfgds import solve_pfgds, solve_pfgds_naive
from .problems import InstanceSpec
from .prox import euclidean_simplex
from .ugs import solve_pfugs, solve_ugs

SOLVERS = ("gds", "pfgds-naive", "pfgds", "ugs", "pfugs")
FORMATS = ("csv", "json")


@dataclass
class SweepRow:
    solver: str
    family: str
    dim: int
    nu: float
    eps: float
    f_grad: int
    f_val: int
    g_grad: int
    g_val: int
    prox_calls: int
    outer_iters: int
    total_backtracks_L: int
    total_backtracks_M: int
    final_gap: float
    wall_time_ms: float
    converged: bool = False
    error: Optional[str] = None


COLUMNS = [f.name for f in fields(SweepRow)]
_INT_COLS = {"dim", "f_grad", "f_val", "g_grad", "g_val", "prox_calls", "outer_iters",
             "total_backtracks_L", "total_backtracks_M"}
_FLOAT_COLS = {"nu", "eps", "final_gap", "wall_time_ms"}


@dataclass
class SweepPlan:
    solver: str
    instance: InstanceSpec
    eps: Sequence[float]
    repetitions: int = 1
    output: Optional[str] = None
    format: str = "csv"
    seed: int = 0
    max_outer: int = 100_000
    budget_fgrad: Optional[int] = 10_000_000
    l0: float = 1.0
    m0: float = 1.0
    solver_options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ConfigurationError(f"unknown solver {self.solver!r}; expected one of {SOLVERS}")
        if self.format not in FORMATS:
            raise ConfigurationError(f"unknown format {self.format!r}")
        eps = [float(e) for e in self.eps]
        if not eps:
            raise ConfigurationError("eps list must not be empty")
        if any(e <= 0 for e in eps) or any(a <= b for a, b in zip(eps, eps[1:])):
            raise ConfigurationError("eps must be positive and strictly decreasing")
        self.eps = eps
        if self.repetitions < 1:
            raise ConfigurationError("repetitions must be at least 1")


def starting_point(setup, seed: int) -> np.ndarray:
    """``x0`` for one repetition: uniform in ``[-1, 1]^n`` (projected), or Dirichlet on the simplex."""
    rng = np.random.default_rng(seed)
    if setup.region == "simplex":
        return rng.dirichlet(np.ones(setup.dim))
    return setup.project(rng.uniform(-1.0, 1.0, setup.dim))


def run_solver(solver: str, problem, x0, eps: float, *, max_outer: int = 100_000,
               budget_fgrad: Optional[int] = None, l0: float = 1.0, m0: float = 1.0,
               tally: Optional[OracleTally] = None, **options):
    """Run one solver until the gap reaches ``eps`` (when the optimum is known) or a cap."""
    tally = tally if tally is not None else OracleTally()
    setup = problem.domain
    if solver in ("gds", "pfgds-naive", "pfgds") and not setup.is_euclidean:
        setup = euclidean_simplex(setup.dim)
    common = dict(stop_gap=eps, budget_fgrad=budget_fgrad)
    if solver == "gds":
        return solve_gds_known(problem, setup, x0, None, None, max_outer, tally, **common)
    if solver == "pfgds-naive":
        return solve_pfgds_naive(problem, setup, x0, l0, m0, max_outer, eps, tally, **common, **options)
    if solver == "pfgds":
        return solve_pfgds(problem, setup, x0, m0, max_outer, tally, **common, **options)
    if solver == "ugs":
        return solve_ugs(problem, setup, x0, l0, m0, eps, max_outer, tally, **common, **options)
    if solver == "pfugs":
        return solve_pfugs(problem, setup, x0, m0, eps, max_outer, tally, **common, **options)
    raise ConfigurationError(f"unknown solver {solver!r}")


def _row(plan: SweepPlan, problem, eps, tally, report, wall_ms, error=None) -> SweepRow:
    trace = report.outer_trace if report is not None else []
    return SweepRow(
        solver=plan.solver, family=plan.instance.family, dim=problem.dim,
        nu=float(problem.metadata.nu) if problem.metadata else float("nan"), eps=eps,
        f_grad=tally.f_grad, f_val=tally.f_val, g_grad=tally.g_grad, g_val=tally.g_val,
        prox_calls=tally.prox_calls, outer_iters=len(trace),
        total_backtracks_L=sum(r.backtracks_l for r in trace),
        total_backtracks_M=sum(r.backtracks_m for r in trace),
        final_gap=report.gap_estimate if report is not None else float("nan"),
        wall_time_ms=wall_ms, converged=bool(report.converged) if report is not None else False,
        error=error)


def run_sweep(plan: SweepPlan) -> list:
    """One row per ``(eps, repetition)``; rows are written to ``plan.output`` as they complete.

    Solver failures (runaway searches) produce a row with ``error`` set instead of
    aborting the sweep.
    """
    problem = plan.instance.build()
    rows = []
    for eps in plan.eps:
        for rep in range(plan.repetitions):
            x0 = starting_point(problem.domain, plan.seed + rep)
            tally = OracleTally()
            start = time.perf_counter()
            report, error = None, None
            try:
                report = run_solver(plan.solver, problem, x0, eps, max_outer=plan.max_outer,
                                    budget_fgrad=plan.budget_fgrad, l0=plan.l0, m0=plan.m0,
                                    tally=tally, **plan.solver_options)
            except GradslideError as exc:
                error = f"{type(exc).__name__}: {exc}"
            wall = 1e3 * (time.perf_counter() - start)
            rows.append(_row(plan, problem, eps, tally, report, wall, error))
            if plan.output:
                emit_report(rows, plan.format, plan.output)
    return rows


def _get(row, name):
    return row[name] if isinstance(row, dict) else getattr(row, name)


def fit_loglog_slope(rows, x_field: str = "eps", y_field: str = "f_grad", trim: bool = True):
    """Least-squares slope of ``log y`` against ``log x``.

    When ``trim`` is set and at least five distinct ``x`` values are present, the
    rows at the largest ``x`` are dropped (they sit in the pre-asymptotic regime).

    Returns
    -------
    (slope, r2)
    """
    pts = [(float(_get(r, x_field)), float(_get(r, y_field))) for r in rows]
    if len(pts) < 3:
        raise DomainError("need at least 3 rows to fit a slope")
    if any(not (x > 0 and y > 0) for x, y in pts):
        raise DomainError(f"{x_field} and {y_field} must be positive for a log-log fit")
    xs = sorted({x for x, _ in pts})
    if trim and len(xs) >= 5:
        pts = [(x, y) for x, y in pts if x != xs[-1]]
    lx = np.log([x for x, _ in pts])
    ly = np.log([y for _, y in pts])
    if np.ptp(lx) == 0:
        raise DomainError("x values are all equal")
    if np.ptp(ly) == 0:
        return 0.0, 1.0
    fit = linregress(lx, ly)
    return float(fit.slope), float(fit.rvalue ** 2)


def _serialize(rows, fmt: str) -> str:
    dicts = [asdict(r) if not isinstance(r, dict) else r for r in rows]
    if fmt == "json":
        return json.dumps(dicts, indent=1) + "\n"
    if fmt != "csv":
        raise ConfigurationError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    for d in dicts:
        writer.writerow({k: ("" if d[k] is None else d[k]) for k in COLUMNS})
    return buf.getvalue()


def emit_report(rows, fmt: str, path: str) -> None:
    """Write rows as CSV (fixed column order, header) or a JSON array, atomically."""
    text = _serialize(rows, fmt)
    folder = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(dir=folder, prefix=".gradslide-", suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write report to {path!r}: {exc.strerror or exc}") from exc


def _coerce(d: dict) -> SweepRow:
    out = {}
    for k in COLUMNS:
        v = d.get(k)
        if k in _INT_COLS:
            v = int(v)
        elif k in _FLOAT_COLS:
            v = float(v)
        elif k == "converged":
            v = v if isinstance(v, bool) else str(v) == "True"
        elif k == "error":
            v = v or None
        out[k] = v
    return SweepRow(**out)


def read_report(path: str, fmt: Optional[str] = None) -> list:
    if fmt is None:
        fmt = "json" if path.endswith(".json") else "csv"
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            if fmt == "json":
                return [_coerce(d) for d in json.load(fh)]
            return [_coerce(d) for d in csv.DictReader(fh)]
    except OSError as exc:
        raise OSError(f"cannot read report {path!r}: {exc.strerror or exc}") from exc


def compare_backends(family: str = "quad-l1", dim: int = 30, eps: float = 1e-2, repeats: int = 3,
                     seed: int = 0) -> dict:
    """Time PFUGS and PFGDS on one instance with each available backend."""
    from . import kernels

    spec = InstanceSpec(family=family, dim=dim, seed=seed)
    problem = spec.build()
    x0 = starting_point(problem.domain, seed)
    backends = ["python"] + (["compiled"] if kernels.HAVE_COMPILED else [])
    solvers = ["pfugs"] + (["pfgds"] if family == "quad-quad" else [])
    out = {}
    for solver in solvers:
        for name in backends:
            best = math.inf
            with kernels.use_backend(name):
                for _ in range(repeats):
                    tally = OracleTally()
                    t0 = time.perf_counter()
                    rep = run_solver(solver, problem, x0, eps, tally=tally)
                    best = min(best, time.perf_counter() - t0)
            out[(solver, name)] = dict(seconds=best, f_grad=tally.f_grad, g_grad=tally.g_grad,
                                       gap=rep.gap_estimate)
    return out

"""Problem model, oracle metering and run reports shared by every solver."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Any, Callable, Optional

import numpy as np


class GradslideError(Exception):
    """Base class for all package errors."""


class OracleError(GradslideError):
    """An oracle returned a non-finite value or gradient."""


class DomainError(GradslideError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(GradslideError, ValueError):
    """Unsupported or inconsistent solver / setup configuration."""


class RunawayError(GradslideError):
    """A line search exceeded its hard cap or an inner loop did not terminate."""


Oracle = Callable[[np.ndarray], "tuple[float, np.ndarray]"]


@dataclass(frozen=True)
class ProblemMetadata:
    """Ground truth attached to a test instance.

    ``m_nu`` and ``lip_l`` are measured in the norm of the problem's prox setup.
    """

    nu: float
    m_nu: float
    lip_l: float
    optimum_value: Optional[float] = None
    optimum_point: Optional[np.ndarray] = None


@dataclass(frozen=True)
class CompositeProblem:
    """``min_{x in X} f(x) + g(x)`` with first-order oracles for both parts.

    ``f`` may be nonsmooth (any Hölder exponent), ``g`` is smooth. ``domain`` is a
    :class:`gradslide.prox.ProxSetup` describing ``X`` and the Bregman geometry.
    ``native`` optionally carries a flat description of ``f`` understood by the
    compiled kernels; problems without it always run on the Python path.
    """

    dim: int
    f_oracle: Oracle
    g_oracle: Oracle
    domain: Any
    metadata: Optional[ProblemMetadata] = None
    name: str = "problem"
    native: Any = None

    def objective(self, x: np.ndarray) -> float:
        """Unmetered ``f(x) + g(x)``; used for monitoring, never for the algorithm."""
        return float(self.f_oracle(x)[0]) + float(self.g_oracle(x)[0])

    def gap(self, x: np.ndarray) -> Optional[float]:
        if self.metadata is None or self.metadata.optimum_value is None:
            return None
        return self.objective(x) - self.metadata.optimum_value


@dataclass
class OracleTally:
    """Counters of oracle consumption for one run."""

    f_val: int = 0
    f_grad: int = 0
    g_val: int = 0
    g_grad: int = 0
    prox_calls: int = 0

    def snapshot(self) -> dict:
        return {fl.name: getattr(self, fl.name) for fl in fields(self)}

    def __sub__(self, other: "OracleTally") -> "OracleTally":
        return OracleTally(**{k: v - getattr(other, k) for k, v in self.snapshot().items()})


def check_point(x: np.ndarray, dim: Optional[int] = None, what: str = "point") -> None:
    if dim is not None and x.shape != (dim,):
        raise DomainError(f"{what} has shape {x.shape}, expected ({dim},)")
    if not np.all(np.isfinite(x)):
        bad = int(np.flatnonzero(~np.isfinite(x))[0])
        raise OracleError(f"{what} has non-finite coordinate {bad}: {x[bad]!r}")


def _call(oracle: Oracle, name: str, x: np.ndarray) -> tuple[float, np.ndarray]:
    value, grad = oracle(x)
    value = float(value)
    grad = np.asarray(grad, dtype=float)
    if not math.isfinite(value):
        raise OracleError(f"{name} returned non-finite value {value!r}")
    check_point(grad, x.shape[0], what=f"{name} gradient")
    return value, grad


def evaluate_f(problem: CompositeProblem, x: np.ndarray, tally: OracleTally,
               value: bool = True, grad: bool = True) -> tuple[float, np.ndarray]:
    """Evaluate ``(f(x), f'(x))`` and charge only the parts the caller consumes.

    Subgradient selection at kinks is fixed per problem (minimum-norm where cheap,
    e.g. 0 at the kink of ``|.|``).
    """
    check_point(x, problem.dim)
    out = _call(problem.f_oracle, "f", x)
    tally.f_val += int(value)
    tally.f_grad += int(grad)
    return out


def evaluate_g(problem: CompositeProblem, x: np.ndarray, tally: OracleTally,
               value: bool = True, grad: bool = True) -> tuple[float, np.ndarray]:
    check_point(x, problem.dim)
    out = _call(problem.g_oracle, "g", x)
    tally.g_val += int(value)
    tally.g_grad += int(grad)
    return out


def holder_smoothing_bound(m_nu: float, nu: float, delta: float) -> float:
    r"""Quadratic constant that majorizes a Hölder-smooth function up to ``delta/2``.

    Returns

    .. math:: \hat M = \Big[\tfrac{1-\nu}{1+\nu}\,\tfrac{1}{\delta}\Big]^{\frac{1-\nu}{1+\nu}}
              M_\nu^{\frac{2}{1+\nu}},

    so that ``f(y) <= f(x) + <f'(x), y-x> + M_hat/2 ||y-x||^2 + delta/2``.
    At ``nu = 1`` the bracket is dropped and ``M_hat = M_1``.
    """
    if not 0.0 <= nu <= 1.0:
        raise DomainError(f"nu must lie in [0, 1], got {nu}")
    if m_nu <= 0 or delta <= 0:
        raise DomainError("m_nu and delta must be positive")
    if nu == 1.0:
        return float(m_nu)
    expo = (1.0 - nu) / (1.0 + nu)
    base = (1.0 - nu) / (1.0 + nu) / delta
    return float(base ** expo * m_nu ** (2.0 / (1.0 + nu)))


@dataclass
class SolverConfig:
    """Knobs shared by the solvers.

    ``backtrack_factor`` is fixed at 2; the line searches double their estimates.
    """

    target_eps: float = 1e-2
    max_outer: int = 100_000
    oracle_budget: Optional[int] = None
    l0: float = 1.0
    m0: float = 1.0
    equality_tol: float = 1e-9
    max_doublings: int = 60
    max_halvings: int = 60
    max_inner: int = 10_000_000
    backtrack_factor: int = field(default=2, init=False)

    def __post_init__(self):
        if not self.target_eps > 0:
            raise ConfigurationError("target_eps must be positive")
        if not (self.l0 > 0 and self.m0 > 0):
            raise ConfigurationError("l0 and m0 must be positive")
        if not 0 < self.equality_tol < 1e-4:
            raise ConfigurationError("equality_tol must lie in (0, 1e-4)")
        if self.max_outer < 1:
            raise ConfigurationError("max_outer must be a positive integer")
        if self.oracle_budget is not None and self.oracle_budget < 1:
            raise ConfigurationError("oracle_budget must be positive")


@dataclass
class OuterRecord:
    """What happened during one outer iteration ``k``."""

    k: int
    lip_l: float
    trials: int
    inner_counts: list
    m_last: float
    gamma: float = 1.0
    capital_gamma: float = float("nan")
    eta: float = float("nan")
    backtracks_l: int = 0
    backtracks_m: int = 0
    probe_fgrad: int = 0
    l_trials: list = field(default_factory=list)
    g_test: list = field(default_factory=list)
    adopted: int = -1
    floor_hit: bool = False
    x_bar: Optional[np.ndarray] = None
    gap: Optional[float] = None
    inner_traces: list = field(default_factory=list)


@dataclass
class RunReport:
    output_point: np.ndarray
    gap_estimate: float
    tally: OracleTally
    outer_trace: list
    converged: bool
    exit_reason: str
    solver: str = ""
    probe_overhead: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def outer_iters(self) -> int:
        return len(self.outer_trace)

    @property
    def total_backtracks_l(self) -> int:
        return sum(r.backtracks_l for r in self.outer_trace)

    @property
    def total_backtracks_m(self) -> int:
        return sum(r.backtracks_m for r in self.outer_trace)


class RunMonitor:
    """Stopping logic shared by the solvers: target gap, iteration cap, f-budget.

    The objective at the running output is evaluated with unmetered oracle calls.
    """

    def __init__(self, problem: CompositeProblem, tally: OracleTally,
                 stop_gap: Optional[float] = None, budget_fgrad: Optional[int] = None,
                 record_points: bool = False):
        self.problem = problem
        self.tally = tally
        self.stop_gap = stop_gap
        self.budget_fgrad = budget_fgrad
        self.record_points = record_points
        self.last_gap: Optional[float] = None

    def observe(self, record: OuterRecord, x_out: np.ndarray) -> Optional[str]:
        gap = self.problem.gap(x_out)
        self.last_gap = gap
        record.gap = gap
        if self.record_points:
            record.x_bar = x_out.copy()
        if self.stop_gap is not None and gap is not None and gap <= self.stop_gap:
            return "target"
        if self.budget_fgrad is not None and self.tally.f_grad >= self.budget_fgrad:
            return "budget"
        return None

    def report(self, solver: str, x_out: np.ndarray, trace: list, reason: Optional[str],
               probe_overhead: int = 0, **extra) -> RunReport:
        gap = self.problem.gap(x_out)
        if gap is None:
            gap = self.problem.objective(x_out)
            converged = False
        elif self.stop_gap is not None:
            converged = gap <= self.stop_gap
        else:
            converged = reason != "budget"
        return RunReport(output_point=x_out, gap_estimate=gap, tally=self.tally,
                         outer_trace=trace, converged=converged,
                         exit_reason=reason or "max_outer", solver=solver,
                         probe_overhead=probe_overhead, extra=extra)

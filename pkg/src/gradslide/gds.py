"""Gradient descent sliding with known constants.

The outer loop linearizes ``g`` at the previous average ``x_tilde`` and the inner
loop takes ``T`` prox-gradient steps on ``f`` against that fixed model, so one
``grad g`` pays for ``T`` evaluations of ``grad f``.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .core import (CompositeProblem, ConfigurationError, DomainError, OracleTally, OuterRecord,
                   RunMonitor, RunReport, evaluate_f, evaluate_g)
from .prox import ProxSetup, composite_prox


def _require_euclidean(setup: ProxSetup) -> None:
    if not setup.is_euclidean:
        raise ConfigurationError("gradient descent sliding is defined for Euclidean setups only")


def gds_subroutine(problem: CompositeProblem, setup: Optional[ProxSetup], x_prev: np.ndarray,
                   x_tilde_prev: np.ndarray, eta: float, m: float, t_count: int,
                   tally: OracleTally, g_grad: Optional[np.ndarray] = None):
    """Run ``t_count`` prox-gradient steps with constant weight ``p = m``.

    Step ``t`` solves ``min <grad g(x_tilde_prev) + grad f(x^{t-1}), x>
    + eta/2 ||x - x_tilde_prev||^2 + m/2 ||x - x^{t-1}||^2`` starting from
    ``x^0 = x_prev``.

    Returns
    -------
    x_k : ndarray
        Last inner iterate.
    x_tilde_k : ndarray
        Average of the iterates weighted by ``1/p`` (a plain mean here).
    """
    setup = setup or problem.domain
    _require_euclidean(setup)
    if not (eta > 0 and m > 0):
        raise DomainError("eta and m must be positive")
    if t_count < 1:
        raise DomainError("t_count must be at least 1")
    if g_grad is None:
        _, g_grad = evaluate_g(problem, x_tilde_prev, tally, value=False)

    x = np.array(x_prev, dtype=float)
    acc = np.zeros_like(x)
    inv_p = 1.0 / m
    for _ in range(t_count):
        _, df = evaluate_f(problem, x, tally, value=False)
        x = composite_prox(setup, g_grad + df, x_tilde_prev, eta, x, m, tally)
        acc += x * inv_p
    return x, acc / (t_count * inv_p)


def solve_gds_known(problem: CompositeProblem, setup: Optional[ProxSetup], x0: np.ndarray,
                    lip_l: Optional[float], lip_m: Optional[float], n_outer: int,
                    tally: Optional[OracleTally] = None, *, stop_gap: Optional[float] = None,
                    budget_fgrad: Optional[int] = None, record_points: bool = False) -> RunReport:
    """GDS with ``L_k = L``, ``M_k = M`` and ``T_k = ceil(M / L)``.

    Missing constants are read from ``problem.metadata``. With the optimum known
    the output satisfies ``gap <= L ||x* - x0||^2 / N``.
    """
    setup = setup or problem.domain
    _require_euclidean(setup)
    meta = problem.metadata
    if lip_l is None:
        lip_l = meta.lip_l if meta is not None else None
    if lip_m is None:
        lip_m = meta.m_nu if meta is not None and meta.nu == 1.0 else None
    if lip_l is None or lip_m is None or not (lip_l > 0 and lip_m > 0):
        raise ConfigurationError("solve_gds_known needs positive L and M (argument or metadata)")
    if n_outer < 1:
        raise ConfigurationError("n_outer must be positive")
    tally = tally if tally is not None else OracleTally()
    mon = RunMonitor(problem, tally, stop_gap, budget_fgrad, record_points)

    t_count = max(1, math.ceil(lip_m / lip_l))
    x = np.array(x0, dtype=float)
    x_tilde = x.copy()
    num = np.zeros_like(x)
    den = 0.0
    trace, reason = [], None
    x_bar = x.copy()
    for k in range(1, n_outer + 1):
        _, gg = evaluate_g(problem, x_tilde, tally, value=False)
        x, x_tilde = gds_subroutine(problem, setup, x, x_tilde, lip_l, lip_m, t_count, tally, g_grad=gg)
        num += x_tilde / lip_l
        den += 1.0 / lip_l
        x_bar = num / den
        rec = OuterRecord(k=k, lip_l=lip_l, trials=1, inner_counts=[t_count], m_last=lip_m, eta=lip_l)
        trace.append(rec)
        reason = mon.observe(rec, x_bar)
        if reason:
            break
    return mon.report("gds", x_bar, trace, reason, t_count=t_count)

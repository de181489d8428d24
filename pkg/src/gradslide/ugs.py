"""Universal gradient sliding (UGS) and its parameter-free variant (PFUGS).

The outer loop is an accelerated scheme on ``g`` with a doubling search on
``L``. Each outer trial calls :func:`ugs_inner`, an accelerated loop on ``f``
whose own estimate ``M`` is found by doubling against a descent test relaxed by
``gamma * alpha * eps / 2``. That slack is what makes a single method cover
nonsmooth, weakly smooth and smooth ``f``.

The inner loop stops exactly when ``A_t = M_t alpha_t**2`` reaches the outer
trial ``L``; a one-off weight ``c >= 1`` on the next ``M`` lands ``A`` on ``L``
when the unforced recursion would undershoot it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .core import (CompositeProblem, ConfigurationError, DomainError, OracleTally, OuterRecord,
                   RunawayError, RunMonitor, RunReport, evaluate_f, evaluate_g)
from .pfgds import descent_holds
from .prox import ProxSetup, bregman, composite_prox
from .recursion import forced_weight, next_coefficient, termination_root_squared

PREDICT_GUARD = 1e-15


@dataclass
class OuterAccelState:
    """Accepted outer iterate ``(x, x_tilde, x_bar)`` with its ``L``, ``gamma`` and ``Gamma``."""

    x: np.ndarray
    x_tilde: np.ndarray
    x_bar: np.ndarray
    lip_l: float
    gamma: float = 1.0
    capital_gamma: float = float("nan")
    k: int = 0


@dataclass
class InnerStep:
    """Trace entry for one accepted inner step."""

    t: int
    m: float
    alpha: float
    capital_a: float
    c_next: float
    forced: bool
    rejected: list = field(default_factory=list)  # (M, alpha) of failed probes


@dataclass
class InnerResult:
    x: np.ndarray
    x_tilde: np.ndarray
    x_bar: np.ndarray
    m_last: float
    steps: int
    doublings: int
    trace: Optional[list] = None


def ugs_inner(problem: CompositeProblem, setup: Optional[ProxSetup], outer: OuterAccelState,
              g_grad_under: np.ndarray, l_trial: float, gamma_trial: float, m_start: float,
              eps: float, tally: OracleTally, *, equality_tol: float = 1e-9,
              max_doublings: int = 60, max_inner: int = 10_000_000,
              record: bool = False) -> InnerResult:
    """Accelerated inner solve of ``<grad g, x> + f(x) + L gamma V(x_prev, x)``.

    Parameters
    ----------
    outer : OuterAccelState
        ``(x_{k-1}, x_tilde_{k-1}, x_bar_{k-1})``; ``x_tilde`` only seeds the inner
        averages and ``x_bar`` enters every extrapolation.
    g_grad_under : ndarray
        ``grad g`` at the outer extrapolation point, reused at every step.
    m_start : float
        Initial estimate, at least ``l_trial``.
    eps : float
        Target accuracy; step ``t`` may violate the quadratic bound by
        ``gamma * alpha_t * eps / 2``.

    Returns
    -------
    InnerResult
        ``steps`` is ``T``; ``f_grad`` grows by ``T + doublings``.
    """
    setup = setup or problem.domain
    if not (l_trial > 0 and gamma_trial > 0 and m_start > 0 and eps > 0):
        raise DomainError("l_trial, gamma, m_start and eps must be positive")
    if m_start < l_trial * (1.0 - 1e-12):
        raise DomainError("m_start must be at least l_trial")

    native = kernels.ugs_inner(problem, setup, outer, g_grad_under, l_trial, gamma_trial, m_start,
                               eps, tally, equality_tol, max_doublings, max_inner, record)
    if native is not None:
        return native

    gamma = gamma_trial
    eta = l_trial * gamma
    x_anchor = outer.x
    xb0 = (1.0 - gamma) * outer.x_bar
    x = np.array(outer.x, dtype=float)
    x_tilde = np.array(outer.x_tilde, dtype=float)
    m_prev, a_prev, c = m_start, 0.0, 1.0
    m_cap = m_start * 2.0 ** max_doublings
    doublings = 0
    trace = [] if record else None
    t = 1
    while True:
        m = c * m_prev
        rejected = []
        while True:
            alpha = 1.0 if t == 1 else next_coefficient(a_prev, m)
            x_under = xb0 + gamma * ((1.0 - alpha) * x_tilde + alpha * x)
            f_u, df_u = evaluate_f(problem, x_under, tally)
            p = l_trial * gamma * (1.0 - alpha) / alpha + gamma * m * alpha
            x_new = composite_prox(setup, g_grad_under + df_u, x_anchor, eta, x, p, tally)
            xt_new = (1.0 - alpha) * x_tilde + alpha * x_new
            xb_new = xb0 + gamma * xt_new
            f_b, _ = evaluate_f(problem, xb_new, tally, grad=False)
            d = xb_new - x_under
            if descent_holds(f_b, f_u, float(df_u @ d), m, setup.sq_norm(d), 0.5 * gamma * alpha * eps):
                break
            if record:
                rejected.append((m, alpha))
            m *= 2.0
            doublings += 1
            if m > m_cap:
                raise RunawayError(f"M estimate exceeded {m_cap!r}; check eps and the scaling of f")
        x, x_tilde = x_new, xt_new
        a = m * alpha * alpha
        done = abs(a - l_trial) <= equality_tol * l_trial
        forced = False
        if done:
            c = 1.0
        elif m * termination_root_squared(alpha) <= l_trial * (1.0 + PREDICT_GUARD):
            if a <= l_trial:
                raise RunawayError("A fell below the outer trial L before termination")
            c = forced_weight(a, m, l_trial)
            forced = True
        else:
            c = 1.0
        if record:
            trace.append(InnerStep(t, m, alpha, a, c, forced, rejected))
        if done:
            break
        if t >= max_inner:
            raise RunawayError(f"inner loop exceeded {max_inner} steps without A reaching L")
        m_prev, a_prev = m, a
        t += 1
    return InnerResult(x, x_tilde, xb_new, m, t, doublings, trace)


def _outer_trial(problem, setup, state: OuterAccelState, lip, gamma, m0, eps, tally, cfg, record,
                 g_under=None, x_under=None):
    """One outer trial: extrapolate, one grad g, inner solve, g-test."""
    if x_under is None:
        x_under = (1.0 - gamma) * state.x_bar + gamma * state.x
    if g_under is None:
        g_under = evaluate_g(problem, x_under, tally)
    g_u, gg_u = g_under
    res = ugs_inner(problem, setup, state, gg_u, lip, gamma, max(m0, lip), eps, tally,
                    equality_tol=cfg["equality_tol"], max_doublings=cfg["max_doublings"],
                    max_inner=cfg["max_inner"], record=record)
    g_b, _ = evaluate_g(problem, res.x_bar, tally, grad=False)
    d = res.x_bar - x_under
    ok = descent_holds(g_b, g_u, float(gg_u @ d), lip, setup.sq_norm(d))
    return ok, res


def _record_trial(rec: OuterRecord, lip, res: InnerResult, ok: bool, record: bool):
    rec.trials += 1
    rec.l_trials.append(lip)
    rec.inner_counts.append(res.steps)
    rec.backtracks_m += res.doublings
    rec.probe_fgrad += res.doublings
    rec.g_test.append(ok)
    if record:
        rec.inner_traces.append(res.trace)


def _accelerated_step(problem, setup, state, k, m0, eps, tally, cfg, record, cap):
    lip = state.lip_l
    rec = OuterRecord(k=k, lip_l=lip, trials=0, inner_counts=[], m_last=float("nan"))
    while True:
        gamma = 1.0 if k == 1 else next_coefficient(state.capital_gamma, lip)
        ok, res = _outer_trial(problem, setup, state, lip, gamma, m0, eps, tally, cfg, record)
        _record_trial(rec, lip, res, ok, record)
        if ok:
            break
        lip *= 2.0
        rec.backtracks_l += 1
        if lip > cap:
            raise RunawayError(f"L estimate exceeded its cap {cap!r}")
    cg = lip * gamma * gamma
    rec.lip_l, rec.gamma, rec.capital_gamma, rec.eta, rec.m_last = lip, gamma, cg, lip * gamma, res.m_last
    rec.adopted = rec.trials - 1
    return OuterAccelState(res.x, res.x_tilde, res.x_bar, lip, gamma, cg, k), rec


def _config(equality_tol, max_doublings, max_halvings, max_inner):
    if not 0 < equality_tol < 1e-4:
        raise ConfigurationError("equality_tol must lie in (0, 1e-4)")
    return dict(equality_tol=equality_tol, max_doublings=max_doublings,
                max_halvings=max_halvings, max_inner=max_inner)


def _check_x0(setup, x0):
    x0 = np.array(x0, dtype=float)
    if not setup.contains(x0):
        raise DomainError("x0 must be feasible")
    if not setup.is_euclidean and np.any(x0 <= 0):
        raise DomainError("entropy setups need a strictly positive x0 (e.g. the barycenter)")
    return x0


def _finish(name, mon, state, trace, reason, problem, setup, x0, eps):
    rep = mon.report(name, state.x_bar, trace, reason,
                     probe_overhead=sum(r.probe_fgrad for r in trace))
    meta = problem.metadata
    if meta is not None and meta.optimum_point is not None:
        rep.extra["v0"] = bregman(setup, x0, meta.optimum_point)
    return rep


def solve_ugs(problem: CompositeProblem, setup: Optional[ProxSetup], x0: np.ndarray, l0: float,
              m0: float, eps: float, n_outer: int, tally: Optional[OracleTally] = None, *,
              stop_gap: Optional[float] = None, budget_fgrad: Optional[int] = None,
              record_points: bool = False, record_inner: bool = False,
              equality_tol: float = 1e-9, max_doublings: int = 60,
              max_inner: int = 10_000_000) -> RunReport:
    """Accelerated outer loop with doubling search on ``L`` from ``l0``.

    Every outer record carries ``gamma`` and ``Gamma = L gamma**2``; the output
    obeys ``gap <= eps/2 + 2 Gamma_N V(x0, x*)``.
    """
    setup = setup or problem.domain
    if not (l0 > 0 and m0 > 0 and eps > 0):
        raise ConfigurationError("l0, m0 and eps must be positive")
    cfg = _config(equality_tol, max_doublings, 60, max_inner)
    tally = tally if tally is not None else OracleTally()
    mon = RunMonitor(problem, tally, stop_gap, budget_fgrad, record_points)
    x0 = _check_x0(setup, x0)
    state = OuterAccelState(x0, x0.copy(), x0.copy(), l0)
    cap = l0 * 2.0 ** max_doublings
    trace, reason = [], None
    for k in range(1, n_outer + 1):
        state, rec = _accelerated_step(problem, setup, state, k, m0, eps, tally, cfg, record_inner, cap)
        trace.append(rec)
        reason = mon.observe(rec, state.x_bar)
        if reason:
            break
    return _finish("ugs", mon, state, trace, reason, problem, setup, x0, eps)


def solve_pfugs(problem: CompositeProblem, setup: Optional[ProxSetup], x0: np.ndarray, m0: float,
                eps: float, n_outer: int, tally: Optional[OracleTally] = None, *,
                stop_gap: Optional[float] = None, budget_fgrad: Optional[int] = None,
                record_points: bool = False, record_inner: bool = False,
                equality_tol: float = 1e-9, max_doublings: int = 60, max_halvings: int = 60,
                max_inner: int = 10_000_000) -> RunReport:
    """Parameter-free UGS: only ``m0`` and ``eps`` are supplied.

    The first outer iteration takes one coupled step with ``L = M = 2**i m0``
    (smallest ``i`` passing both tests), then halves ``L`` with full inner
    solves until the g-test fails and keeps the last passing trial. When the
    g-test cannot fail (``g`` affine) the halving stops after ``max_halvings``.
    Later iterations follow :func:`solve_ugs`.
    """
    setup = setup or problem.domain
    if not (m0 > 0 and eps > 0):
        raise ConfigurationError("m0 and eps must be positive")
    cfg = _config(equality_tol, max_doublings, max_halvings, max_inner)
    tally = tally if tally is not None else OracleTally()
    mon = RunMonitor(problem, tally, stop_gap, budget_fgrad, record_points)
    x0 = _check_x0(setup, x0)
    state0 = OuterAccelState(x0, x0.copy(), x0.copy(), m0)

    # coupled step: gamma = alpha = 1, so both gradients are taken at x0 once
    g_0 = evaluate_g(problem, x0, tally)
    f_0, df_0 = evaluate_f(problem, x0, tally)
    lin = g_0[1] + df_0
    lip = m0
    ups = 0
    while True:
        x1 = composite_prox(setup, lin, x0, lip, x0, lip, tally)
        f_1, _ = evaluate_f(problem, x1, tally, grad=False)
        g_1, _ = evaluate_g(problem, x1, tally, grad=False)
        d = x1 - x0
        dd = setup.sq_norm(d)
        f_ok = descent_holds(f_1, f_0, float(df_0 @ d), lip, dd, 0.5 * eps)
        g_ok = descent_holds(g_1, g_0[0], float(g_0[1] @ d), lip, dd)
        if f_ok and g_ok:
            break
        lip *= 2.0
        ups += 1
        if ups > max_doublings:
            raise RunawayError("coupled L = M search exceeded its cap")
    lip11 = lip
    rec = OuterRecord(k=1, lip_l=lip, trials=1, inner_counts=[1], m_last=lip, gamma=1.0,
                      backtracks_l=ups, backtracks_m=ups, l_trials=[lip], g_test=[True])
    if record_inner:
        rec.inner_traces.append([InnerStep(1, lip, 1.0, lip, 1.0, False, [])])
    best = (lip, InnerResult(x1, x1.copy(), x1.copy(), lip, 1, 0))

    for s in range(2, max_halvings + 2):
        lip_s = lip11 / 2.0 ** (s - 1)
        ok, res = _outer_trial(problem, setup, state0, lip_s, 1.0, m0, eps, tally, cfg, record_inner,
                               g_under=g_0, x_under=x0)
        _record_trial(rec, lip_s, res, ok, record_inner)
        if not ok:
            break
        best = (lip_s, res)
    else:
        rec.floor_hit = True
    lip, res = best
    rec.adopted = rec.l_trials.index(lip)
    rec.lip_l, rec.capital_gamma, rec.eta, rec.m_last = lip, lip, lip, res.m_last
    state = OuterAccelState(res.x, res.x_tilde, res.x_bar, lip, 1.0, lip, 1)
    trace = [rec]
    reason = mon.observe(rec, state.x_bar)

    cap = lip11 * 2.0 ** max_doublings
    for k in range(2, n_outer + 1):
        if reason:
            break
        state, rec = _accelerated_step(problem, setup, state, k, m0, eps, tally, cfg, record_inner, cap)
        trace.append(rec)
        reason = mon.observe(rec, state.x_bar)
    return _finish("pfugs", mon, state, trace, reason, problem, setup, x0, eps)

"""Parameter-free gradient descent sliding.

``adaptive_sliding_subroutine`` estimates the smoothness of ``f`` by doubling and
stretches its own iteration budget so that ``eta * sum(1/p_t) == 1`` at exit.
``solve_pfgds_naive`` adds an outer doubling search on ``L`` from a user guess
``l0``; ``solve_pfgds`` removes ``l0`` by a coupled up-search followed by a
halving search in the first outer iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .core import (CompositeProblem, ConfigurationError, DomainError, OracleTally, OuterRecord,
                   RunawayError, RunMonitor, RunReport, evaluate_f, evaluate_g)
from .gds import _require_euclidean
from .prox import ProxSetup, composite_prox

TEST_RTOL = 1e-12


def descent_holds(f_new: float, f_old: float, lin: float, curv: float, sq_dist: float,
                  slack: float = 0.0) -> bool:
    """``f_new <= f_old + lin + curv/2 * sq_dist + slack`` up to a relative rounding allowance."""
    rhs = f_old + lin + 0.5 * curv * sq_dist + slack
    return f_new <= rhs + TEST_RTOL * max(1.0, abs(f_new), abs(rhs))


def round_m_init(m: float, eta: float) -> float:
    """Round ``m`` up to the nearest positive integer multiple of ``eta``."""
    q = max(1, math.ceil(m / eta * (1.0 - 1e-12)))
    return q * eta


@dataclass
class AdaptiveInnerInfo:
    steps: int
    doublings: int
    m_last: float
    p_weights: list = field(default_factory=list)
    budgets: list = field(default_factory=list)

    def eta_sum_inv_p(self, eta: float) -> float:
        return eta * math.fsum(1.0 / p for p in self.p_weights)


def adaptive_sliding_subroutine(problem: CompositeProblem, setup: Optional[ProxSetup],
                                x_prev: np.ndarray, x_tilde_prev: np.ndarray, eta: float,
                                m_init: float, tally: OracleTally, *,
                                g_grad: Optional[np.ndarray] = None, max_doublings: int = 60,
                                max_inner: int = 10_000_000, return_info: bool = False):
    """Inner loop with an on-the-fly smoothness estimate for ``f``.

    Parameters
    ----------
    eta : float
        Weight of the outer proximal term (the current ``L`` trial).
    m_init : float
        Starting estimate; ``max(m_init, eta) / eta`` must be a positive integer.
    g_grad : ndarray, optional
        ``grad g(x_tilde_prev)`` if the caller already holds it.

    Returns
    -------
    (x_k, x_tilde_k, m_last) or (x_k, x_tilde_k, m_last, AdaptiveInnerInfo)

    Notes
    -----
    The budget ``T`` is kept as a Python int. Accepting step ``t`` with an
    estimate that grew by ``2**j`` sets ``T <- 2**j (T - t + 1) - 1 + t``, which
    keeps ``eta * sum(1/p) = 1`` exactly in rational arithmetic.
    """
    setup = setup or problem.domain
    _require_euclidean(setup)
    if not (eta > 0 and m_init > 0):
        raise DomainError("eta and m_init must be positive")
    m0 = max(m_init, eta)
    ratio = m0 / eta
    budget = round(ratio)
    if budget < 1 or abs(ratio - budget) > 1e-9 * ratio:
        raise ConfigurationError(f"max(m_init, eta)/eta = {ratio!r} is not a positive integer")
    if g_grad is None:
        _, g_grad = evaluate_g(problem, x_tilde_prev, tally, value=False)

    native = kernels.adaptive_inner(problem, setup, x_prev, x_tilde_prev, g_grad, eta, m0, budget,
                                    tally, max_doublings, max_inner, return_info)
    if native is not None:
        x, x_tilde, m, info = native
        return (x, x_tilde, m, info) if return_info else (x, x_tilde, m)

    x = np.array(x_prev, dtype=float)
    fx, df = evaluate_f(problem, x, tally)
    m = m0
    total_doublings = 0
    acc = np.zeros_like(x)
    inv_sum = 0.0
    info = AdaptiveInnerInfo(0, 0, m0) if return_info else None
    t = 1
    while True:
        lin = g_grad + df
        j = 0
        while True:
            x_new = composite_prox(setup, lin, x_tilde_prev, eta, x, m, tally)
            # the oracle hands back the gradient too; it is charged below only if used
            f_new, df_new = evaluate_f(problem, x_new, tally, grad=False)
            d = x_new - x
            if descent_holds(f_new, fx, float(df @ d), m, float(d @ d)):
                break
            m *= 2.0
            j += 1
            total_doublings += 1
            if total_doublings > max_doublings:
                raise RunawayError(f"M estimate exceeded 2**{max_doublings} * M_init; is f really smooth?")
        budget = (1 << j) * (budget - t + 1) - 1 + t
        acc += x_new / m
        inv_sum += 1.0 / m
        if info is not None:
            info.p_weights.append(m)
            info.budgets.append(budget)
        x, fx, df = x_new, f_new, df_new
        if budget <= t:
            break
        if t >= max_inner:
            raise RunawayError(f"inner loop exceeded {max_inner} steps")
        tally.f_grad += 1  # consume the gradient returned with the accepted probe
        t += 1
    x_tilde = acc / inv_sum
    if info is not None:
        info.steps, info.doublings, info.m_last = t, total_doublings, m
        return x, x_tilde, m, info
    return x, x_tilde, m


class _Outer:
    """Shared state of the outer loop: iterates, g cache and the averaged output."""

    def __init__(self, problem, setup, x0, tally, mon, max_doublings, max_inner):
        self.problem, self.setup, self.tally, self.mon = problem, setup, tally, mon
        self.max_doublings, self.max_inner = max_doublings, max_inner
        self.x = np.array(x0, dtype=float)
        self.x_tilde = self.x.copy()
        self.g_val, self.g_grad = evaluate_g(problem, self.x_tilde, tally)
        self.num = np.zeros_like(self.x)
        self.den = 0.0
        self.trace: list = []

    def g_test(self, x_tilde_new, lip):
        g_new, gg_new = evaluate_g(self.problem, x_tilde_new, self.tally, grad=False)
        d = x_tilde_new - self.x_tilde
        ok = descent_holds(g_new, self.g_val, float(self.g_grad @ d), lip, float(d @ d))
        return ok, g_new, gg_new

    def inner(self, eta, m_init):
        return adaptive_sliding_subroutine(
            self.problem, self.setup, self.x, self.x_tilde, eta, round_m_init(m_init, eta), self.tally,
            g_grad=self.g_grad, max_doublings=self.max_doublings, max_inner=self.max_inner,
            return_info=True)

    def accept(self, rec, lip, x_new, x_tilde_new, g_new, gg_new):
        self.x, self.x_tilde = x_new, x_tilde_new
        self.g_val, self.g_grad = g_new, gg_new
        self.num += x_tilde_new / lip
        self.den += 1.0 / lip
        self.trace.append(rec)
        return self.mon.observe(rec, self.x_bar)

    @property
    def x_bar(self):
        return self.num / self.den if self.den > 0 else self.x.copy()

    def naive_step(self, k, lip_prev, m_last, cap):
        """One outer iteration of the doubling search on ``L``; returns (L_k, M_last, reason)."""
        if k > 1:
            self.tally.g_grad += 1  # gradient returned with the last accepted g-test
        lip = lip_prev
        rec = OuterRecord(k=k, lip_l=lip, trials=0, inner_counts=[], m_last=m_last)
        while True:
            x_s, xt_s, m_last, info = self.inner(lip, m_last)
            rec.trials += 1
            rec.inner_counts.append(info.steps)
            rec.backtracks_m += info.doublings
            rec.l_trials.append(lip)
            ok, g_new, gg_new = self.g_test(xt_s, lip)
            rec.g_test.append(ok)
            if ok:
                break
            lip *= 2.0
            rec.backtracks_l += 1
            if lip > cap:
                raise RunawayError(f"L estimate exceeded its cap {cap!r}")
        rec.lip_l, rec.m_last, rec.eta = lip, m_last, lip
        rec.adopted = rec.trials - 1
        return lip, m_last, self.accept(rec, lip, x_s, xt_s, g_new, gg_new)


def solve_pfgds_naive(problem: CompositeProblem, setup: Optional[ProxSetup], x0: np.ndarray,
                      l0: float, m0: float, n_outer: int, eps: Optional[float] = None,
                      tally: Optional[OracleTally] = None, *, stop_gap: Optional[float] = None,
                      budget_fgrad: Optional[int] = None, record_points: bool = False,
                      max_doublings: int = 60, max_inner: int = 10_000_000) -> RunReport:
    """Outer doubling search on ``L`` starting from ``l0``, inner adaptive loop on ``f``.

    ``eps`` only serves the advisory check of ``l0 >= eps / ||x0 - x*||^2``, which is
    reported in ``report.extra["l0_valid"]`` when the optimum is known.
    """
    setup = setup or problem.domain
    _require_euclidean(setup)
    if not (l0 > 0 and m0 > 0):
        raise ConfigurationError("l0 and m0 must be positive")
    tally = tally if tally is not None else OracleTally()
    mon = RunMonitor(problem, tally, stop_gap, budget_fgrad, record_points)
    st = _Outer(problem, setup, x0, tally, mon, max_doublings, max_inner)

    extra = {}
    meta = problem.metadata
    if eps is not None and meta is not None and meta.optimum_point is not None:
        dist = float(np.sum((np.asarray(x0) - meta.optimum_point) ** 2))
        extra["l0_valid"] = bool(dist == 0 or (l0 >= eps / dist and l0 <= meta.lip_l))

    cap = l0 * 2.0 ** max_doublings
    lip, m_last, reason = l0, m0, None
    for k in range(1, n_outer + 1):
        lip, m_last, reason = st.naive_step(k, lip, m_last, cap)
        if reason:
            break
    return mon.report("pfgds-naive", st.x_bar, st.trace, reason, **extra)


def solve_pfgds(problem: CompositeProblem, setup: Optional[ProxSetup], x0: np.ndarray, m0: float,
                n_outer: int, tally: Optional[OracleTally] = None, *,
                stop_gap: Optional[float] = None, budget_fgrad: Optional[int] = None,
                record_points: bool = False, max_doublings: int = 60, max_halvings: int = 60,
                max_inner: int = 10_000_000) -> RunReport:
    """Fully parameter-free GDS: only ``m0`` is supplied.

    At ``k = 1`` a single coupled step doubles ``L = M`` from ``m0`` until both
    descent tests pass, then ``L`` is halved with full inner solves while the
    g-test keeps passing. The last passing trial is adopted; if the g-test never
    fails, the search stops after ``max_halvings`` halvings.
    """
    setup = setup or problem.domain
    _require_euclidean(setup)
    if not m0 > 0:
        raise ConfigurationError("m0 must be positive")
    tally = tally if tally is not None else OracleTally()
    mon = RunMonitor(problem, tally, stop_gap, budget_fgrad, record_points)
    st = _Outer(problem, setup, x0, tally, mon, max_doublings, max_inner)
    x0 = st.x

    # coupled up-search: one f-gradient and one g-gradient at x0, values per probe
    f0, df0 = evaluate_f(problem, x0, tally)
    lin = st.g_grad + df0
    lip = m0
    ups = 0
    while True:
        x1 = composite_prox(setup, lin, x0, lip, x0, lip, tally)
        f1, _ = evaluate_f(problem, x1, tally, grad=False)
        d = x1 - x0
        dd = float(d @ d)
        f_ok = descent_holds(f1, f0, float(df0 @ d), lip, dd)
        g_ok, g1, gg1 = st.g_test(x1, lip)
        if f_ok and g_ok:
            break
        lip *= 2.0
        ups += 1
        if ups > max_doublings:
            raise RunawayError("coupled L = M search exceeded its cap")
    lip11 = lip
    m_last = lip
    rec = OuterRecord(k=1, lip_l=lip, trials=1, inner_counts=[1], m_last=m_last, eta=lip,
                      backtracks_l=ups, backtracks_m=ups, l_trials=[lip], g_test=[True])
    best = (lip, x1, x1, g1, gg1)

    # halving search with full inner solves
    for s in range(2, max_halvings + 2):
        lip_s = lip11 / 2.0 ** (s - 1)
        x_s, xt_s, m_last, info = st.inner(lip_s, m_last)
        rec.trials += 1
        rec.inner_counts.append(info.steps)
        rec.backtracks_m += info.doublings
        rec.l_trials.append(lip_s)
        ok, g_s, gg_s = st.g_test(xt_s, lip_s)
        rec.g_test.append(ok)
        if not ok:
            break
        best = (lip_s, x_s, xt_s, g_s, gg_s)
    else:
        rec.floor_hit = True
    rec.adopted = rec.l_trials.index(best[0])
    lip, x1, xt1, g1, gg1 = best
    rec.lip_l, rec.m_last, rec.eta = lip, m_last, lip
    reason = st.accept(rec, lip, x1, xt1, g1, gg1)

    cap = lip11 * 2.0 ** max_doublings
    for k in range(2, n_outer + 1):
        if reason:
            break
        lip, m_last, reason = st.naive_step(k, lip, m_last, cap)
    return mon.report("pfgds", st.x_bar, st.trace, reason)

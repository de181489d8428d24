"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Each test measures, records its line through ``record_criterion`` and then
asserts, so a failing criterion still reports what it measured.
"""

import math
from time import perf_counter

import numpy as np
import pytest

from gradslide import kernels
from gradslide.bench import SweepPlan, fit_loglog_slope, run_solver, run_sweep, starting_point
from gradslide.core import OracleTally, RunawayError, holder_smoothing_bound
from gradslide.gds import solve_gds_known
from gradslide.pfgds import adaptive_sliding_subroutine, round_m_init
from gradslide.problems import FAMILIES, InstanceSpec, make_quad_l1, make_quad_power
from gradslide.prox import (ball, box, composite_prox, entropy_simplex, euclidean, euclidean_simplex,
                            three_point_check)
from gradslide.recursion import forced_weight, next_coefficient
from gradslide.ugs import OuterAccelState, solve_pfugs, solve_ugs, ugs_inner

from conftest import make_problem, record_criterion, zero_oracle

BACKENDS = ["python", "compiled"] if kernels.HAVE_COMPILED else ["python"]


def _check(ac_id, name, passed, detail):
    record_criterion(ac_id, name, bool(passed), detail)
    assert passed, detail


class Injecting:
    """Diagonal quadratic whose value is inflated by 1e6 on chosen call indices."""

    def __init__(self, d, c, hits):
        self.d, self.c, self.hits, self.n = d, c, set(hits), 0

    def __call__(self, x):
        r = x - self.c
        v = 0.5 * float(np.sum(self.d * r * r))
        if self.n in self.hits:
            v += 1e6
        self.n += 1
        return v, self.d * r


def test_ac1_inner_budget_identity():
    rng = np.random.default_rng(1)
    t0 = perf_counter()
    worst, doublings, runs = 0.0, 0, 0
    for i in range(1000):
        dim = int(rng.integers(1, 21))
        eta = 10 ** rng.uniform(0, 1)
        m_init = round_m_init(10 ** rng.uniform(-1, 1), eta)
        if i % 2:
            d = 10 ** rng.uniform(-1, 1, dim)
            hits = rng.choice(6, size=int(rng.integers(0, 3)), replace=False)
            p = make_problem(Injecting(d, rng.uniform(-1, 1, dim), hits), zero_oracle, dim=dim)
            backend = "python"
        else:
            p = InstanceSpec(family="quad-quad", dim=dim, seed=i, m_target=10 ** rng.uniform(0, 1)).build()
            backend = BACKENDS[-1]
        x, xt = rng.uniform(-1, 1, dim), rng.uniform(-1, 1, dim)
        with kernels.use_backend(backend):
            _, _, _, info = adaptive_sliding_subroutine(p, None, x, xt, eta, m_init, OracleTally(),
                                                        g_grad=rng.normal(size=dim), return_info=True)
        worst = max(worst, abs(info.eta_sum_inv_p(eta) - 1.0))
        doublings += info.doublings
        runs += 1
    secs = perf_counter() - t0
    ok = runs == 1000 and worst <= 1e-12 and doublings > 0 and secs < 10
    _check(1, "inner budget identity eta*sum(1/p) = 1", ok,
           f"runs={runs} worst={worst:.2e} doublings={doublings} time={secs:.2f}s")


def test_ac2_inner_termination():
    rng = np.random.default_rng(2)
    pool = [InstanceSpec(family=fam, dim=dim, seed=dim, nu=0.5).build()
            for fam in ("quad-l1", "quad-power", "quad-quad") for dim in (2, 5, 10, 15, 20)]
    t0 = perf_counter()
    worst_end, worst_pre, min_c, runs = 0.0, math.inf, math.inf, 0
    for i in range(500):
        p = pool[i % len(pool)]
        x = rng.uniform(-1, 1, p.dim)
        st = OuterAccelState(x, rng.uniform(-1, 1, p.dim), rng.uniform(-1, 1, p.dim), 1.0)
        l_trial = 10 ** rng.uniform(-1, 1)
        gamma = rng.uniform(0.05, 1.0)
        m_start = l_trial * 10 ** rng.uniform(0, 1.5)
        eps = 10 ** rng.uniform(-2, -0.5)
        with kernels.use_backend(BACKENDS[i % len(BACKENDS)]):
            res = ugs_inner(p, None, st, rng.normal(size=p.dim), l_trial, gamma, m_start, eps,
                            OracleTally(), record=True)
        tr = res.trace
        worst_end = max(worst_end, abs(tr[-1].capital_a - l_trial) / l_trial)
        for s in tr[:-1]:
            worst_pre = min(worst_pre, s.capital_a / l_trial)
        min_c = min(min_c, min(s.c_next for s in tr))
        runs += 1
    secs = perf_counter() - t0
    ok = (runs == 500 and worst_end <= 1e-9 and worst_pre >= 1 - 1e-12 and min_c >= 1 - 1e-12
          and secs < 30)
    _check(2, "inner loop lands A on L", ok,
           f"runs={runs} |A_T-L|/L<={worst_end:.1e} min A_t/L={worst_pre:.6f} "
           f"min c={min_c:.6f} time={secs:.2f}s")


def _schedule(rng, length):
    """Nondecreasing E with repeats, doublings and random jumps."""
    steps = rng.choice([1.0, 1.0, 2.0, 0.0], size=length - 1)
    jumps = np.where(steps == 0.0, 10 ** rng.uniform(0, 0.5, length - 1), steps)
    return 10 ** rng.uniform(-3, 3) * np.concatenate([[1.0], np.cumprod(jumps)])


def _run_schedule(e):
    lam, cap = [1.0], [e[0]]
    for et in e[1:]:
        nl = next_coefficient(cap[-1], et)
        lam.append(nl)
        cap.append(et * nl * nl)
    return np.array(lam), np.array(cap)


def test_ac3_coefficient_properties():
    rng = np.random.default_rng(3)
    t0 = perf_counter()
    golden = 2.0 / (1.0 + math.sqrt(5.0))
    fails = dict.fromkeys("a b d e g h i j".split(), 0)
    n, length = 10_000, 20
    for _ in range(n):
        e = _schedule(rng, length)
        lam, cap = _run_schedule(e)
        tau = np.arange(1, length + 1)
        # (a) lambda in (0, 1) after the first step, Lambda positive and strictly decreasing
        fails["a"] += not (np.all((lam[1:] > 0) & (lam[1:] < 1)) and np.all(cap > 0)
                           and np.all(np.diff(cap) < 0))
        # (b) Lambda_tau * sum lambda_i / Lambda_i = 1
        partial = np.cumsum(lam / cap) * cap
        fails["b"] += not np.all(np.abs(partial - 1.0) <= 1e-9)
        # (d), (e) lambda strictly decreasing and at most 2 / (tau + 1)
        fails["d"] += not np.all(np.diff(lam) < 0)
        fails["e"] += not np.all(lam <= 2.0 / (tau + 1) * (1 + 1e-12))
        # (g) forcing lands on any E_fix in [Lambda_tau, Lambda_{tau-1})
        k = int(rng.integers(1, length))
        e_fix = rng.uniform(cap[k], cap[k - 1])
        c = forced_weight(cap[k - 1], e[k], e_fix)
        hat = next_coefficient(cap[k - 1], c * e[k])
        fails["g"] += not (c >= 1 - 1e-12 and abs(c * e[k] * hat * hat - e_fix) <= 1e-12 * e_fix)
        # (h) inflating E by q shrinks lambda by at most sqrt(q)
        q = 10 ** rng.uniform(0, 1)
        bar = next_coefficient(cap[k - 1], q * e[k])
        fails["h"] += not lam[k] <= math.sqrt(q) * bar * (1 + 1e-12)
        # (i) a repeated E keeps the ratio of successive lambdas above the golden ratio
        same = np.flatnonzero(e[1:] == e[:-1])
        fails["i"] += not np.all(lam[same + 1] >= golden * lam[same] * (1 - 1e-12))
        # (j) Lambda_tau >= E_1 / tau^2
        fails["j"] += not np.all(cap >= e[0] / tau ** 2 * (1 - 1e-12))
    secs = perf_counter() - t0
    ok = not any(fails.values()) and secs < 5
    detail = " ".join(f"{k}:{v}" for k, v in fails.items())
    _check(3, "coefficient recursion properties", ok,
           f"{n} schedules, failures {detail} time={secs:.2f}s")


def test_ac4_gds_known_constants():
    t0 = perf_counter()
    worst, counts_ok = -math.inf, True
    for m in (10.0, 100.0):
        p = InstanceSpec(family="quad-quad", dim=10, l_target=1.0, m_target=m, seed=4).build()
        x0 = starting_point(p.domain, 4)
        dist2 = float(np.sum((p.metadata.optimum_point - x0) ** 2))
        tally = OracleTally()
        rep = solve_gds_known(p, None, x0, 1.0, m, 200, tally, record_points=True)
        for n, r in enumerate(rep.outer_trace, start=1):
            worst = max(worst, r.gap - (1.0 * dist2 / n + 1e-10))
        counts_ok &= tally.g_grad == 200 and tally.f_grad == 200 * math.ceil(m / 1.0)
        for n in (1, 7, 50):
            t = OracleTally()
            solve_gds_known(p, None, x0, 1.0, m, n, t)
            counts_ok &= t.g_grad == n and t.f_grad == n * math.ceil(m)
    secs = perf_counter() - t0
    ok = worst <= 0 and counts_ok and secs < 5
    _check(4, "gds gap bound and exact counts", ok,
           f"max(gap - bound)={worst:.2e} counts_ok={counts_ok} time={secs:.2f}s")


def test_ac5_pfgds_separation():
    # curvatures spread over a factor 2, so the estimated constants track L and M
    t0 = perf_counter()
    ratios = []
    for m in (10.0, 100.0):
        p = InstanceSpec(family="quad-quad", dim=10, l_target=1.0, m_target=m, seed=0, spread=0.5).build()
        for rep in range(3):
            tally = OracleTally()
            out = run_solver("pfgds", p, starting_point(p.domain, 42 + rep), 1e-3, tally=tally)
            ratios.append((m, out.converged, tally.f_grad / tally.g_grad / m))
    secs = perf_counter() - t0
    ok = all(conv and 0.25 <= r <= 4.0 for _, conv, r in ratios) and secs < 30
    _check(5, "pfgds f/g ratio within 4x of M/L", ok,
           " ".join(f"M/L={m:g}:{r:.2f}" for m, _, r in ratios) + f" time={secs:.2f}s")


def test_ac6_output_bound_replay():
    t0 = perf_counter()
    eps = 1e-2
    p = InstanceSpec(family="quad-l1", dim=20, seed=6).build()
    x0 = starting_point(p.domain, 6)
    worst, iters = -math.inf, {}
    for name in ("ugs", "pfugs"):
        if name == "ugs":
            rep = solve_ugs(p, None, x0, 1.0, 1.0, eps, 150, record_points=True)
        else:
            rep = solve_pfugs(p, None, x0, 1.0, eps, 150, record_points=True)
        v0 = rep.extra["v0"]
        for r in rep.outer_trace:
            worst = max(worst, r.gap - (eps / 2 + 2 * r.capital_gamma * v0 + 1e-9))
        iters[name] = len(rep.outer_trace)
    secs = perf_counter() - t0
    ok = worst <= 0 and secs < 30
    _check(6, "gap <= eps/2 + 2 Gamma_k V(x0, x*) at every k", ok,
           f"outer ugs={iters['ugs']} pfugs={iters['pfugs']} max excess={worst:.2e} time={secs:.2f}s")


SCALING = [
    ("nu=0", InstanceSpec(family="quad-l1", dim=30, seed=7, l1_weight=0.3, b_scale=3.0),
     {"f_grad": (-2.35, -1.65), "g_grad": (-0.85, -0.15)}),
    ("nu=1", InstanceSpec(family="quad-quad", dim=30, seed=7, l_target=1.0, m_target=100.0, spread=1e-8),
     {"f_grad": (-0.85, -0.15)}),
    ("nu=0.5", InstanceSpec(family="quad-power", dim=20, seed=7, nu=0.5),
     {"f_grad": (-1.15, -0.45)}),
]


def test_ac7_pfugs_scaling():
    t0 = perf_counter()
    parts, ok = [], True
    for label, spec, targets in SCALING:
        plan = SweepPlan("pfugs", spec, [1e-1, 3e-2, 1e-2, 3e-3, 1e-3], repetitions=3, seed=42,
                         budget_fgrad=10**8)
        rows = run_sweep(plan)
        conv = all(r.converged for r in rows)
        ok &= conv
        for field, (lo, hi) in targets.items():
            slope, r2 = fit_loglog_slope(rows, "eps", field)
            inside = lo <= slope <= hi
            ok &= inside
            parts.append(f"{label} {field} {slope:.2f} in [{lo}, {hi}] {'ok' if inside else 'MISS'}")
        if not conv:
            parts.append(f"{label} not converged")
    secs = perf_counter() - t0
    ok &= secs < 300
    _check(7, "pfugs complexity exponents", ok, "; ".join(parts) + f"; time={secs:.1f}s")


def _grid_objective(kind, lin, a1, w1, a2, w2, pts):
    """Objective of the composite prox evaluated directly on a point cloud."""
    if kind == "entropy":
        def kl(a):
            return np.sum(np.where(pts > 0, pts * np.log(np.where(pts > 0, pts, 1) / a), 0.0)
                          - pts + a, axis=1)
        return pts @ lin + w1 * kl(a1) + w2 * kl(a2)
    return pts @ lin + 0.5 * w1 * np.sum((pts - a1) ** 2, axis=1) + 0.5 * w2 * np.sum((pts - a2) ** 2, axis=1)


def _grid(setup):
    if setup.region == "simplex":
        s = np.arange(0, 1001) * 1e-3
        return np.column_stack([s, 1 - s])
    if setup.dim == 1:
        return (np.arange(-3000, 3001) * 1e-3)[:, None]
    ax = np.arange(-1500, 1501) * 1e-3
    pts = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
    if setup.region == "box":
        return pts[np.all((pts >= setup.lo) & (pts <= setup.hi), axis=1)]
    if setup.region == "ball":
        return pts[np.linalg.norm(pts - setup.center, axis=1) <= setup.radius]
    return pts


def _instance(setup, rng, scale=1.0):
    n = setup.dim
    if setup.region == "simplex":
        return (rng.normal(size=n), rng.dirichlet(np.ones(n)), rng.uniform(0, 3),
                rng.dirichlet(np.ones(n)), rng.uniform(0.1, 3))
    w1, w2 = rng.uniform(0, 3), rng.uniform(0.1, 3)
    return (rng.uniform(-scale, scale, n) * (w1 + w2) / 2, rng.uniform(-0.5, 0.5, n) * scale, w1,
            rng.uniform(-0.5, 0.5, n) * scale, w2)


def _probe(setup, rng):
    if setup.region == "simplex":
        return rng.dirichlet(np.ones(setup.dim) * rng.uniform(0.2, 2))
    return setup.project(rng.uniform(-3, 3, setup.dim))


def test_ac8_prox_correctness():
    rng = np.random.default_rng(8)
    t0 = perf_counter()
    setups = {"euclidean": lambda n: euclidean(n), "box": lambda n: box(-0.7, 0.4, n),
              "ball": lambda n: ball(np.full(n, 0.1), 0.8), "entropy": lambda n: entropy_simplex(n),
              "euclidean-simplex": lambda n: euclidean_simplex(n)}
    min_slack = {}
    for name, make in setups.items():
        worst = math.inf
        for _ in range(1000):
            setup = make(int(rng.integers(2 if "simplex" in name or name == "entropy" else 1, 12)))
            lin, a1, w1, a2, w2 = _instance(setup, rng, 2.0)
            worst = min(worst, three_point_check(setup, lin, a1, w1, a2, w2, _probe(setup, rng)))
        min_slack[name] = worst

    grid_err = 0.0
    cases = [(euclidean(1), "euclid"), (euclidean(2), "euclid"), (box(-0.7, 0.4, 2), "euclid"),
             (ball(np.full(2, 0.1), 0.8), "euclid"), (entropy_simplex(2), "entropy"),
             (euclidean_simplex(2), "euclid")]
    for setup, kind in cases:
        pts = _grid(setup)
        for _ in range(3):
            lin, a1, w1, a2, w2 = _instance(setup, rng, 1.0)
            u = composite_prox(setup, lin, a1, w1, a2, w2)
            best = pts[int(np.argmin(_grid_objective(kind, lin, a1, w1, a2, w2, pts)))]
            grid_err = max(grid_err, float(np.max(np.abs(best - u))))
    secs = perf_counter() - t0
    ok = min(min_slack.values()) >= -1e-10 and grid_err <= 2e-3 and secs < 20
    _check(8, "prox three-point slack and grid search", ok,
           " ".join(f"{k}:{v:.1e}" for k, v in min_slack.items())
           + f" grid err={grid_err:.1e} time={secs:.2f}s")


def test_ac9_parameter_free_smoke():
    t0 = perf_counter()
    results = []
    for fam in FAMILIES:
        p = InstanceSpec(family=fam, dim=10, seed=0).build()
        x0 = starting_point(p.domain, 0)
        for solver in ("pfgds", "pfugs"):
            tally = OracleTally()
            try:
                rep = run_solver(solver, p, x0, 1e-2, m0=1.0, tally=tally, budget_fgrad=10**7)
                good = rep.converged and rep.gap_estimate <= 1e-2 and tally.f_grad <= 10**7
                note = f"gap={rep.gap_estimate:.1e}"
            except RunawayError as exc:
                good, note = False, type(exc).__name__
            results.append((fam, solver, good, tally.f_grad, note))
    secs = perf_counter() - t0
    ok = all(r[2] for r in results) and secs < 120
    failed = [f"{f}/{s} f_grad={n} {note}" for f, s, g, n, note in results if not g]
    _check(9, "pfgds and pfugs converge from m0=1 on every family", ok,
           f"{sum(r[2] for r in results)}/{len(results)} converged"
           + (f"; failed: {', '.join(failed)}" if failed else "") + f"; time={secs:.1f}s")


def _pairs(rng, n, count):
    x = rng.uniform(-10, 10, (count, n))
    y = rng.uniform(-10, 10, (count, n))
    q = count // 4
    y[:q] = -x[:q]
    y[q:2 * q] = x[q:2 * q] + rng.normal(size=(q, n)) * 10 ** rng.uniform(-4, 0, (q, 1))
    return x, y


def test_ac10_smoothing_envelope():
    rng = np.random.default_rng(10)
    t0 = perf_counter()
    worst, total = -math.inf, 0
    instances = {0.0: make_quad_l1(5, seed=1), 0.3: make_quad_power(5, 0.3, seed=1),
                 0.7: make_quad_power(5, 0.7, seed=1)}
    for nu, p in instances.items():
        for delta in (1e-2, 1e-1):
            m_hat = holder_smoothing_bound(p.metadata.m_nu, nu, delta)
            xs, ys = _pairs(rng, p.dim, 10_000)
            for x, y in zip(xs, ys):
                fx, dfx = p.f_oracle(x)
                fy, _ = p.f_oracle(y)
                d = y - x
                excess = fy - (fx + float(dfx @ d) + 0.5 * m_hat * float(d @ d) + 0.5 * delta)
                worst = max(worst, excess / max(1.0, abs(fy)))
                total += 1
    secs = perf_counter() - t0
    ok = worst <= 1e-12 and total == 60_000 and secs < 5
    _check(10, "delta/2-slacked quadratic envelope", ok,
           f"pairs={total} max rel excess={worst:.2e} time={secs:.2f}s")

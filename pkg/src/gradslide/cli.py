"""Command-line entry point: ``gradslide run | fit | selftest | bench``.

Exit codes: 0 success, 2 usage error, 3 IO error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .bench import SOLVERS, SweepPlan, compare_backends, fit_loglog_slope, read_report, run_sweep
from .core import ConfigurationError, DomainError
from .problems import InstanceSpec

EXIT_OK, EXIT_USAGE, EXIT_IO = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _eps_list(text: str):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad eps list {text!r}")


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gradslide", description="Gradient sliding solvers and sweeps.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run a solver over an eps sweep and write a report")
    r.add_argument("--solver", required=True, choices=SOLVERS)
    r.add_argument("--instance", required=True, help="instance spec JSON file (or inline JSON)")
    r.add_argument("--eps", required=True, type=_eps_list, help="comma-separated, decreasing")
    r.add_argument("--reps", type=int, default=1)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", default=None)
    r.add_argument("--format", choices=("csv", "json"), default="csv")
    r.add_argument("--max-outer", type=int, default=100_000)
    r.add_argument("--budget-fgrad", type=int, default=10_000_000)
    r.add_argument("--l0", type=float, default=1.0)
    r.add_argument("--m0", type=float, default=1.0)

    f = sub.add_parser("fit", help="fit a log-log slope to a report")
    f.add_argument("--in", dest="path", required=True)
    f.add_argument("--y", default="f_grad")
    f.add_argument("--x", default="eps")
    f.add_argument("--no-trim", action="store_true", help="keep the largest-x rows")

    sub.add_parser("selftest", help="quick built-in invariant checks")

    b = sub.add_parser("bench", help="time the compiled and pure-Python backends")
    b.add_argument("--family", default="quad-l1")
    b.add_argument("--dim", type=int, default=30)
    b.add_argument("--eps", type=float, default=1e-2)
    b.add_argument("--repeats", type=int, default=3)
    return p


def _load_instance(arg: str) -> InstanceSpec:
    text = arg
    if not arg.lstrip().startswith("{"):
        with open(arg, encoding="utf-8") as fh:
            text = fh.read()
    try:
        return InstanceSpec.from_json(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"instance spec is not valid JSON: {exc}") from exc
    except TypeError as exc:
        raise ConfigurationError(f"bad instance spec: {exc}") from exc


def _cmd_run(a) -> int:
    plan = SweepPlan(solver=a.solver, instance=_load_instance(a.instance), eps=a.eps,
                     repetitions=a.reps, output=a.out, format=a.format, seed=a.seed,
                     max_outer=a.max_outer, budget_fgrad=a.budget_fgrad, l0=a.l0, m0=a.m0)
    rows = run_sweep(plan)
    for row in rows:
        status = row.error or ("converged" if row.converged else "not converged")
        print(f"eps={row.eps:g} f_grad={row.f_grad} g_grad={row.g_grad} "
              f"gap={row.final_gap:.3e} {status}")
    return EXIT_OK


def _cmd_fit(a) -> int:
    rows = read_report(a.path)
    slope, r2 = fit_loglog_slope(rows, a.x, a.y, trim=not a.no_trim)
    print(f"slope={slope:.4f} r2={r2:.4f}")
    return EXIT_OK


def _selftest() -> list:
    from .core import OracleTally
    from .pfgds import adaptive_sliding_subroutine
    from .prox import euclidean, three_point_check
    from .recursion import forced_weight, next_coefficient
    from .ugs import solve_pfugs

    rng = np.random.default_rng(0)
    results = []

    worst = 0.0
    for _ in range(200):
        lam = rng.uniform(0.1, 10.0)
        e = rng.uniform(0.1, 10.0)
        a = next_coefficient(lam, e)
        worst = max(worst, abs(e * a * a - (1 - a) * lam) / max(1.0, lam))
    results.append(("coefficient recursion", worst <= 1e-12))

    ok = True
    for _ in range(50):
        lam = rng.uniform(1.0, 10.0)
        natural = next_coefficient(lam, 1.0) ** 2
        e_fix = rng.uniform(natural, lam)
        c = forced_weight(lam, 1.0, e_fix)
        ok &= c >= 1.0 - 1e-12
    results.append(("forced weight >= 1", bool(ok)))

    setup = euclidean(5)
    slack = min(three_point_check(setup, rng.normal(size=5), rng.normal(size=5), 1.0,
                                  rng.normal(size=5), 2.0, rng.normal(size=5))
                for _ in range(100))
    results.append(("three-point inequality", slack >= -1e-10))

    prob = InstanceSpec(family="quad-quad", dim=8, seed=1).build()
    worst = 0.0
    for _ in range(50):
        x = rng.uniform(-1, 1, 8)
        _, _, _, info = adaptive_sliding_subroutine(prob, prob.domain, x, x, 0.5, 1.0,
                                                    OracleTally(), g_grad=rng.normal(size=8),
                                                    return_info=True)
        worst = max(worst, abs(info.eta_sum_inv_p(0.5) - 1.0))
    results.append(("inner budget identity", worst <= 1e-12))

    prob = InstanceSpec(family="quad-l1", dim=8, seed=1).build()
    rep = solve_pfugs(prob, prob.domain, np.zeros(8), 1.0, 1e-2, 10_000, stop_gap=1e-2)
    results.append(("pfugs reaches 1e-2 on quad-l1", rep.gap_estimate <= 1e-2))
    return results


def _cmd_selftest(_a) -> int:
    results = _selftest()
    for name, ok in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return EXIT_OK if all(ok for _, ok in results) else 1


def _cmd_bench(a) -> int:
    out = compare_backends(a.family, a.dim, a.eps, a.repeats)
    for (solver, backend), v in out.items():
        print(f"{solver:6s} {backend:9s} {1e3 * v['seconds']:9.2f} ms  "
              f"f_grad={v['f_grad']} g_grad={v['g_grad']}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "fit": _cmd_fit, "selftest": _cmd_selftest, "bench": _cmd_bench}
    try:
        return handler[args.command](args)
    except (ConfigurationError, DomainError) as exc:
        print(f"gradslide: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"gradslide: io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

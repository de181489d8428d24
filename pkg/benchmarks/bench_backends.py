"""Time the compiled inner loops against the pure-Python fallback.

Usage::

    python3 benchmarks/bench_backends.py [--dim 30] [--eps 1e-2] [--repeats 3]

Both backends run the same solver on the same instance; the oracle tallies must
match exactly, so the comparison is like for like.
"""

import argparse
import sys

from gradslide import kernels
from gradslide.bench import compare_backends


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dim", type=int, default=30)
    ap.add_argument("--eps", type=float, default=1e-2)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)

    if not kernels.HAVE_COMPILED:
        print("compiled extension not built; only the Python backend is available")
    mismatch = False
    for family in ("quad-l1", "quad-power", "quad-quad"):
        out = compare_backends(family, args.dim, args.eps, args.repeats)
        for solver in sorted({s for s, _ in out}):
            py = out[(solver, "python")]
            line = f"{family:10s} {solver:6s} python {1e3 * py['seconds']:9.2f} ms"
            if (solver, "compiled") in out:
                c = out[(solver, "compiled")]
                same = (c["f_grad"], c["g_grad"]) == (py["f_grad"], py["g_grad"])
                mismatch |= not same
                line += (f"  compiled {1e3 * c['seconds']:8.2f} ms  speedup {py['seconds'] / c['seconds']:6.1f}x"
                         f"  tallies {'match' if same else 'DIFFER'}")
            print(line + f"  f_grad={py['f_grad']} g_grad={py['g_grad']}")
    return 1 if mismatch else 0


if __name__ == "__main__":
    sys.exit(main())

"""Shared helpers and the acceptance summary printed at the end of the run."""

import numpy as np
import pytest

from gradslide.core import CompositeProblem, ProblemMetadata
from gradslide.prox import euclidean

_ACCEPTANCE: dict = {}


def record_criterion(ac_id: int, name: str, passed: bool, detail: str = "") -> None:
    line = f"AC{ac_id:<2d} {'PASS' if passed else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else "")
    _ACCEPTANCE.setdefault(ac_id, []).append((passed, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for ac_id in sorted(_ACCEPTANCE):
        for _, line in _ACCEPTANCE[ac_id]:
            terminalreporter.write_line(line)


def quad_oracle(d, c):
    d = np.asarray(d, dtype=float)
    c = np.asarray(c, dtype=float)

    def oracle(x):
        r = x - c
        return 0.5 * float(np.sum(d * r * r)), d * r
    return oracle


def zero_oracle(x):
    return 0.0, np.zeros_like(x)


def abs_oracle(w=1.0):
    def oracle(x):
        return w * float(np.sum(np.abs(x))), w * np.sign(x)
    return oracle


def make_problem(f, g, setup=None, dim=None, meta=None, name="custom"):
    """A problem built from Python callables; it always runs on the Python path."""
    if setup is None:
        setup = euclidean(dim)
    return CompositeProblem(setup.dim, f, g, setup, meta, name=name)


def quad_quad_problem(dg, cg, df, cf, setup=None):
    dg, cg, df, cf = (np.asarray(v, dtype=float) for v in (dg, cg, df, cf))
    setup = setup or euclidean(dg.size)
    xs = (dg * cg + df * cf) / (dg + df)
    f, g = quad_oracle(df, cf), quad_oracle(dg, cg)
    meta = ProblemMetadata(1.0, float(df.max()), float(dg.max()), f(xs)[0] + g(xs)[0], xs)
    return make_problem(f, g, setup, meta=meta)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

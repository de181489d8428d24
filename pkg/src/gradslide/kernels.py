"""Backend selection for the inner loops.

The two inner loops (the adaptive GDS loop and the accelerated UGS loop) dominate
run time. When the compiled extension ``_ckernels`` is importable and the
problem describes ``f`` with a :class:`NativeF`, those loops run in C. Otherwise
the callers fall back to their pure-Python loops, which are the reference
implementation. Both paths charge the tally identically.

Choose the backend with the ``GRADSLIDE_BACKEND`` environment variable
(``auto``, ``python`` or ``compiled``) or with :func:`use_backend`.
"""

from __future__ import annotations

import contextlib
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ConfigurationError, RunawayError

try:
    from . import _ckernels
    HAVE_COMPILED = True
except ImportError:  # pragma: no cover - depends on the build
    _ckernels = None
    HAVE_COMPILED = False

BACKENDS = ("auto", "python", "compiled")
_F_KINDS = {"quad": 0, "l1": 1, "power": 2}
_REGIONS = {"rn": 0, "box": 1, "ball": 2}

_backend = os.environ.get("GRADSLIDE_BACKEND", "auto").lower()
if _backend not in BACKENDS:
    raise ConfigurationError(f"GRADSLIDE_BACKEND must be one of {BACKENDS}, got {_backend!r}")


@dataclass(frozen=True, eq=False)
class NativeF:
    """Flat description of ``f`` the compiled kernels can evaluate.

    ``quad``  : ``0.5 * sum(diag * (x - center)**2)``
    ``l1``    : ``weight * sum(|x|)``
    ``power`` : ``weight / (1 + nu) * sum(|x|**(1 + nu))``
    """

    kind: str
    weight: float = 0.0
    nu: float = 0.0
    diag: Optional[np.ndarray] = None
    center: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in _F_KINDS:
            raise ConfigurationError(f"unknown native f kind {self.kind!r}")


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend
    name = name.lower()
    if name not in BACKENDS:
        raise ConfigurationError(f"backend must be one of {BACKENDS}")
    if name == "compiled" and not HAVE_COMPILED:
        raise ConfigurationError("compiled backend requested but the extension is not built")
    _backend = name


@contextlib.contextmanager
def use_backend(name: str):
    old = _backend
    set_backend(name)
    try:
        yield
    finally:
        set_backend(old)


def _empty():
    return np.zeros(1)


def _native_args(problem, setup):
    """Flat arguments for the C loops, or None when the Python path must be used."""
    if _backend == "python" or not HAVE_COMPILED:
        return None
    nf = problem.native
    if not isinstance(nf, NativeF) or not setup.is_euclidean or setup.region not in _REGIONS:
        return None
    region = _REGIONS[setup.region]
    fd = np.ascontiguousarray(nf.diag, dtype=float) if nf.kind == "quad" else _empty()
    fc = np.ascontiguousarray(nf.center, dtype=float) if nf.kind == "quad" else _empty()
    lo = np.ascontiguousarray(setup.lo, dtype=float) if region == 1 else _empty()
    hi = np.ascontiguousarray(setup.hi, dtype=float) if region == 1 else _empty()
    ctr = np.ascontiguousarray(setup.center, dtype=float) if region == 2 else _empty()
    rad = float(setup.radius) if region == 2 else 0.0
    return (_F_KINDS[nf.kind], float(nf.weight), float(nf.nu), fd, fc, region, lo, hi, ctr, rad)


def _vec(x):
    return np.ascontiguousarray(x, dtype=float)


def _charge(tally, fv, fg, pc):
    tally.f_val += fv
    tally.f_grad += fg
    tally.prox_calls += pc


def adaptive_inner(problem, setup, x_prev, x_tilde_prev, g_grad, eta, m0, budget, tally,
                   max_doublings, max_inner, want_info):
    """Compiled adaptive GDS loop; None if the Python loop must run instead."""
    args = _native_args(problem, setup)
    if args is None:
        return None
    from .pfgds import AdaptiveInnerInfo

    p_weights = [] if want_info else None
    budgets = [] if want_info else None
    out = _ckernels.adaptive_inner(*args, _vec(x_prev), _vec(x_tilde_prev), _vec(g_grad),
                                   float(eta), float(m0), int(budget), int(max_doublings),
                                   int(max_inner), p_weights, budgets)
    x, x_tilde, m, steps, doublings, fv, fg, pc, status = out
    _charge(tally, fv, fg, pc)
    if status == 1:
        raise RunawayError(f"M estimate exceeded 2**{max_doublings} * M_init; is f really smooth?")
    if status == 2:
        raise RunawayError(f"inner loop exceeded {max_inner} steps")
    info = None
    if want_info:
        info = AdaptiveInnerInfo(steps, doublings, m, p_weights, budgets)
    return x, x_tilde, m, info


def ugs_inner(problem, setup, outer, g_grad_under, l_trial, gamma, m_start, eps, tally,
              equality_tol, max_doublings, max_inner, record):
    """Compiled accelerated UGS loop; None if the Python loop must run instead."""
    args = _native_args(problem, setup)
    if args is None:
        return None
    from .ugs import InnerResult, InnerStep

    raw = [] if record else None
    out = _ckernels.ugs_inner(*args, _vec(outer.x), _vec(outer.x_tilde), _vec(outer.x_bar),
                              _vec(g_grad_under), float(l_trial), float(gamma), float(m_start),
                              float(eps), float(equality_tol), int(max_doublings), int(max_inner), raw)
    x, x_tilde, x_bar, m, steps, doublings, fv, fg, pc, status = out
    _charge(tally, fv, fg, pc)
    if status == 1:
        raise RunawayError(f"M estimate exceeded {m_start * 2.0 ** max_doublings!r}; "
                           "check eps and the scaling of f")
    if status == 2:
        raise RunawayError(f"inner loop exceeded {max_inner} steps without A reaching L")
    if status == 3:
        raise RunawayError("A fell below the outer trial L before termination")
    trace = [InnerStep(*r) for r in raw] if record else None
    return InnerResult(x, x_tilde, x_bar, m, steps, doublings, trace)

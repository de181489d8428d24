"""Test instances with certified constants and closed-form optima.

Every quadratic is diagonal, so ``L``, smooth ``M`` and the optimum are exact.
Families:

``quad-l1``                 g = 0.5 sum d_i (x_i - b_i)^2,  f = w ||x||_1            (nu = 0)
``quad-quad``               g, f diagonal quadratics                                 (nu = 1)
``quad-power``              g diagonal quadratic, f = w/(1+nu) sum |x_i|^(1+nu)     (0 < nu < 1)
``simplex-entropy-linear``  on the simplex: f = <c, x> + w/2 ||x||^2, g diagonal quadratic,
                            entropy prox setup (constants in the l1 norm)
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .core import CompositeProblem, ConfigurationError, DomainError, ProblemMetadata
from .kernels import NativeF
from .prox import ProxSetup, box, entropy_simplex, euclidean

FAMILIES = ("quad-l1", "quad-quad", "quad-power", "simplex-entropy-linear")


def _spectrum(spec, dim: int, default=(1.0, 1.0)) -> np.ndarray:
    """Diagonal from an explicit array or a ``(min, max)`` / ``{"min", "max"}`` span.

    Spans are log-spaced with both endpoints included; for ``dim == 2`` the two
    readings coincide.
    """
    if spec is None:
        spec = default
    if isinstance(spec, dict):
        spec = (spec["min"], spec["max"])
    arr = np.asarray(spec, dtype=float)
    if arr.shape == (dim,):
        out = arr.copy()
    elif arr.shape == (2,):
        out = np.geomspace(arr[0], arr[1], dim) if dim > 1 else arr[1:].copy()
    elif arr.ndim == 0:
        out = np.full(dim, float(arr))
    else:
        raise ConfigurationError(f"cannot build a spectrum of size {dim} from {spec!r}")
    if np.any(out <= 0):
        raise DomainError("diagonal spectrum must be positive")
    return out


def _region(region: str, dim: int, halfwidth: float) -> ProxSetup:
    if region == "rn":
        return euclidean(dim)
    if region == "box":
        return box(-halfwidth, halfwidth, dim)
    raise ConfigurationError(f"unsupported region {region!r} for this family")


def _quad(d: np.ndarray, c: np.ndarray):
    def oracle(x):
        r = x - c
        return 0.5 * float(np.sum(d * r * r)), d * r
    return oracle


def shrink(b, tau):
    """Soft threshold ``sign(b) * max(|b| - tau, 0)``."""
    return np.sign(b) * np.maximum(np.abs(b) - tau, 0.0)


def _feasible_opt(setup: ProxSetup, xstar: np.ndarray) -> np.ndarray:
    # separable convex 1-D problems: clipping the free minimizer is optimal on a box
    return setup.project(xstar) if setup.region == "box" else xstar


def make_quad_l1(dim: int, diag_spectrum=(1.0, 16.0), l1_weight: float = 1.0, seed: int = 0, *,
                 b: Optional[np.ndarray] = None, b_scale: float = 1.0, region: str = "rn",
                 halfwidth: float = 10.0) -> CompositeProblem:
    """Lasso-like instance with ``x*_i = shrink(b_i, w / d_i)``.

    ``M_0 = 2 w sqrt(n)`` bounds the linearization gap of ``w ||x||_1`` by
    ``M_0 ||y - x||_2``; ``L = max d``. The subgradient at a kink is 0.
    """
    if l1_weight < 0:
        raise DomainError("l1_weight must be nonnegative")
    rng = np.random.default_rng(seed)
    d = _spectrum(diag_spectrum, dim)
    b = rng.uniform(-b_scale, b_scale, dim) if b is None else np.asarray(b, dtype=float)
    w = float(l1_weight)
    setup = _region(region, dim, halfwidth)

    def f(x):
        return w * float(np.sum(np.abs(x))), w * np.sign(x)

    xs = _feasible_opt(setup, shrink(b, w / d))
    g = _quad(d, b)
    meta = ProblemMetadata(nu=0.0, m_nu=2.0 * w * np.sqrt(dim), lip_l=float(d.max()),
                           optimum_value=f(xs)[0] + g(xs)[0], optimum_point=xs)
    return CompositeProblem(dim, f, g, setup, meta, name="quad-l1", native=NativeF("l1", weight=w))


def make_quad_quad(dim: int, l_target: float = 1.0, m_target: float = 10.0, seed: int = 0, *,
                   spread: float = 1e-3, g_center=None, f_center=None, g_diag=None, f_diag=None,
                   center_scale: float = 1.0, region: str = "rn",
                   halfwidth: float = 10.0) -> CompositeProblem:
    """Two diagonal quadratics with top curvatures ``L = l_target`` and ``M = m_target``.

    Curvatures are log-spaced over ``[spread * top, top]`` (shuffled independently
    for ``f`` and ``g``) unless given explicitly.
    """
    if not (m_target >= l_target > 0):
        raise DomainError("need m_target >= l_target > 0")
    rng = np.random.default_rng(seed)
    dg = _spectrum(g_diag if g_diag is not None else (spread * l_target, l_target), dim)
    df = _spectrum(f_diag if f_diag is not None else (spread * m_target, m_target), dim)
    if g_diag is None:
        dg = rng.permutation(dg)
    if f_diag is None:
        df = rng.permutation(df)
    cg = rng.uniform(-center_scale, center_scale, dim) if g_center is None else np.asarray(g_center, float)
    cf = rng.uniform(-center_scale, center_scale, dim) if f_center is None else np.asarray(f_center, float)
    setup = _region(region, dim, halfwidth)
    f, g = _quad(df, cf), _quad(dg, cg)
    xs = _feasible_opt(setup, (dg * cg + df * cf) / (dg + df))
    meta = ProblemMetadata(nu=1.0, m_nu=float(df.max()), lip_l=float(dg.max()),
                           optimum_value=f(xs)[0] + g(xs)[0], optimum_point=xs)
    return CompositeProblem(dim, f, g, setup, meta, name="quad-quad",
                            native=NativeF("quad", diag=df, center=cf))


def _power_root(d: float, b: float, w: float, nu: float) -> float:
    """Solve ``d (x - b) + w sign(x) |x|^nu = 0``; the root lies between 0 and b."""
    if b == 0.0 or w == 0.0:
        return b
    a = abs(b)
    t = brentq(lambda s: d * (s - a) + w * s ** nu, 0.0, a, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return float(np.copysign(t, b))


def make_quad_power(dim: int, nu: float = 0.5, weight: float = 1.0, seed: int = 0, *,
                    diag_spectrum=(1.0, 16.0), b=None, b_scale: float = 1.0, region: str = "rn",
                    halfwidth: float = 10.0, certify_samples: int = 10_000) -> CompositeProblem:
    """Weakly smooth ``f`` with Hölder exponent ``nu`` plus a diagonal quadratic.

    ``M_nu`` ships as a sampled certificate (inflated by 1.25) over ``[-10, 10]^n``.
    """
    if not 0.0 < nu < 1.0:
        raise DomainError("quad-power needs 0 < nu < 1; use quad-l1 or quad-quad at the ends")
    if weight <= 0:
        raise DomainError("weight must be positive")
    rng = np.random.default_rng(seed)
    d = _spectrum(diag_spectrum, dim)
    b = rng.uniform(-b_scale, b_scale, dim) if b is None else np.asarray(b, dtype=float)
    w = float(weight)
    setup = _region(region, dim, halfwidth)

    def f(x):
        a = np.abs(x)
        return w / (1.0 + nu) * float(np.sum(a ** (1.0 + nu))), w * np.sign(x) * a ** nu

    g = _quad(d, b)
    xs = np.array([_power_root(di, bi, w, nu) for di, bi in zip(d, b)])
    xs = _feasible_opt(setup, xs)
    draft = CompositeProblem(dim, f, g, setup, ProblemMetadata(nu, 1.0, float(d.max())))
    m_hat, _ = certify_constants(draft, (-10.0, 10.0), certify_samples, 1.25, seed=seed)
    meta = ProblemMetadata(nu=float(nu), m_nu=m_hat, lip_l=float(d.max()),
                           optimum_value=f(xs)[0] + g(xs)[0], optimum_point=xs)
    return CompositeProblem(dim, f, g, setup, meta, name="quad-power",
                            native=NativeF("power", weight=w, nu=float(nu)))


def _weighted_simplex_min(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``argmin_{x in simplex} sum(a x^2 / 2 - v x)`` by sorting the breakpoints of the multiplier."""
    order = np.argsort(-v)
    vs, inv_a = v[order], 1.0 / a[order]
    cw = np.cumsum(vs * inv_a)
    ci = np.cumsum(inv_a)
    tau = (cw - 1.0) / ci
    # largest k with vs[k-1] > tau_k is the active set size
    k = int(np.flatnonzero(vs > tau)[-1])
    return np.maximum((v - tau[k]) / a, 0.0)


def make_simplex_entropy_linear(dim: int, weight: float = 1.0, seed: int = 0, *,
                                diag_spectrum=(1.0, 4.0), c_scale: float = 1.0) -> CompositeProblem:
    """Smooth problem on the probability simplex with the entropy geometry.

    ``f = <c, x> + w/2 ||x||_2^2`` and ``g = 0.5 sum d_i (x_i - b_i)^2``. In the l1
    norm ``M_1 = w`` and ``L = max d``; the same values hold in l2.
    """
    rng = np.random.default_rng(seed)
    d = _spectrum(diag_spectrum, dim)
    b = rng.dirichlet(np.ones(dim))
    c = rng.uniform(-c_scale, c_scale, dim)
    w = float(weight)

    def f(x):
        return float(c @ x) + 0.5 * w * float(x @ x), c + w * x

    g = _quad(d, b)
    xs = _weighted_simplex_min(w + d, d * b - c)
    meta = ProblemMetadata(nu=1.0, m_nu=w, lip_l=float(d.max()),
                           optimum_value=f(xs)[0] + g(xs)[0], optimum_point=xs)
    return CompositeProblem(dim, f, g, entropy_simplex(dim), meta, name="simplex-entropy-linear")


def _sample_pairs(setup: ProxSetup, lo: float, hi: float, samples: int, rng):
    n = setup.dim
    if setup.region == "simplex":
        x = rng.dirichlet(np.ones(n), samples)
        y = rng.dirichlet(np.ones(n), samples)
        return x, y
    x = rng.uniform(lo, hi, (samples, n))
    y = rng.uniform(lo, hi, (samples, n))
    q = samples // 4
    y[:q] = -x[:q]                                            # antipodal pairs
    y[q:2 * q] = x[q:2 * q] + rng.normal(0, 1e-3, (q, n))      # close pairs
    mag = rng.uniform(0, hi, (q, 1)) * np.sign(rng.normal(size=(q, n)))
    x[2 * q:3 * q], y[2 * q:3 * q] = mag, -mag                 # equal magnitudes, antipodal
    return x, y


def certify_constants(problem: CompositeProblem, box_range=(-10.0, 10.0), samples: int = 10_000,
                      inflation: float = 1.25, nu: Optional[float] = None, seed: int = 0):
    """Empirical Hölder constant of ``f`` and Lipschitz constant of ``grad g``.

    Returns the largest ratios ``(1 + nu) gap_f / ||y - x||^(1+nu)`` and
    ``2 gap_g / ||y - x||^2`` over random pairs (plus antipodal and close pairs),
    each multiplied by ``inflation``. The norm is the one of ``problem.domain``.
    """
    if samples < 10_000:
        raise DomainError("certification needs at least 1e4 samples")
    if inflation < 1.1:
        raise DomainError("inflation must be at least 1.1")
    if nu is None:
        nu = problem.metadata.nu if problem.metadata is not None else 1.0
    setup = problem.domain
    rng = np.random.default_rng(seed)
    xs, ys = _sample_pairs(setup, box_range[0], box_range[1], samples, rng)
    m_best, l_best = 0.0, 0.0
    for x, y in zip(xs, ys):
        r = setup.norm(y - x)
        if r == 0.0:
            continue
        fx, dfx = problem.f_oracle(x)
        gx, dgx = problem.g_oracle(x)
        gap_f = problem.f_oracle(y)[0] - fx - float(dfx @ (y - x))
        gap_g = problem.g_oracle(y)[0] - gx - float(dgx @ (y - x))
        m_best = max(m_best, (1.0 + nu) * gap_f / r ** (1.0 + nu))
        l_best = max(l_best, 2.0 * gap_g / (r * r))
    return inflation * m_best, inflation * l_best


@dataclass
class InstanceSpec:
    """Serializable description of a factory instance."""

    family: str
    dim: int = 10
    seed: int = 0
    diag: Optional[dict] = None
    l1_weight: float = 1.0
    nu: float = 0.5
    weight: float = 1.0
    l_target: float = 1.0
    m_target: float = 10.0
    spread: float = 1e-3
    b_scale: float = 1.0
    region: str = "rn"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if not (isinstance(self.dim, int) and self.dim >= 1):
            raise ConfigurationError("dim must be a positive integer")
        if self.diag is not None and set(self.diag) != {"min", "max"}:
            raise ConfigurationError('diag must look like {"min": ..., "max": ...}')

    @classmethod
    def from_dict(cls, data: dict) -> "InstanceSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown instance fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "InstanceSpec":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return asdict(self)

    def build(self) -> CompositeProblem:
        if self.family == "quad-l1":
            return make_quad_l1(self.dim, self.diag or (1.0, 16.0), self.l1_weight, self.seed,
                                b_scale=self.b_scale, region=self.region)
        if self.family == "quad-quad":
            return make_quad_quad(self.dim, self.l_target, self.m_target, self.seed,
                                  spread=self.spread, center_scale=self.b_scale, region=self.region)
        if self.family == "quad-power":
            return make_quad_power(self.dim, self.nu, self.weight, self.seed,
                                   diag_spectrum=self.diag or (1.0, 16.0), b_scale=self.b_scale,
                                   region=self.region)
        return make_simplex_entropy_linear(self.dim, self.weight, self.seed,
                                           diag_spectrum=self.diag or (1.0, 4.0), c_scale=self.b_scale)


def build_instance(spec) -> CompositeProblem:
    if isinstance(spec, dict):
        spec = InstanceSpec.from_dict(spec)
    return spec.build()

"""Distance-generating functions, Bregman divergences and the two-anchor prox.

Supported geometries
--------------------
* ``euclidean-l2`` with ``omega = 0.5 ||x||^2`` over R^n, a box, an l2-ball or
  the probability simplex.
* ``entropy-l1-simplex`` with ``omega = sum x log x`` over the probability simplex.
  It is 1-strongly convex w.r.t. the l1 norm on the simplex.

Every supported combination has a closed-form composite prox.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp, xlogy

from .core import ConfigurationError, DomainError, OracleTally

EUCLIDEAN = "euclidean-l2"
ENTROPY = "entropy-l1-simplex"
REGIONS = ("rn", "box", "ball", "simplex")

# smallest coordinate an entropy iterate may take; keeps iterates in the relative interior
_TINY = np.finfo(float).tiny


@dataclass(frozen=True, eq=False)
class ProxSetup:
    """Geometry of the feasible set.

    Parameters
    ----------
    norm_tag : str
        ``"euclidean-l2"`` or ``"entropy-l1-simplex"``.
    region : str
        One of ``"rn"``, ``"box"``, ``"ball"``, ``"simplex"``.
    dim : int
    lo, hi : ndarray, optional
        Box bounds.
    center, radius : optional
        Ball description.
    """

    norm_tag: str
    region: str
    dim: int
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    center: Optional[np.ndarray] = None
    radius: Optional[float] = None

    def __post_init__(self):
        if self.norm_tag not in (EUCLIDEAN, ENTROPY):
            raise ConfigurationError(f"unknown norm tag {self.norm_tag!r}")
        if self.region not in REGIONS:
            raise ConfigurationError(f"unknown region {self.region!r}")
        if self.norm_tag == ENTROPY and self.region != "simplex":
            raise ConfigurationError("the entropy setup is only defined on the simplex")
        if self.region == "box":
            if self.lo is None or self.hi is None or np.any(self.lo > self.hi):
                raise ConfigurationError("box needs lo <= hi")
        if self.region == "ball" and (self.center is None or not self.radius or self.radius <= 0):
            raise ConfigurationError("ball needs a center and a positive radius")

    @property
    def is_euclidean(self) -> bool:
        return self.norm_tag == EUCLIDEAN

    def norm(self, v: np.ndarray) -> float:
        """Primal norm of the setup (l2 or l1)."""
        if self.is_euclidean:
            return float(np.sqrt(v @ v))
        return float(np.abs(v).sum())

    def sq_norm(self, v: np.ndarray) -> float:
        if self.is_euclidean:
            return float(v @ v)
        s = float(np.abs(v).sum())
        return s * s

    def omega(self, x: np.ndarray) -> float:
        if self.is_euclidean:
            return 0.5 * float(x @ x)
        return float(xlogy(x, x).sum())

    def grad_omega(self, x: np.ndarray) -> np.ndarray:
        if self.is_euclidean:
            return x.copy()
        _require_interior(x)
        return np.log(x) + 1.0

    def project(self, y: np.ndarray) -> np.ndarray:
        """Nearest feasible point (in the setup's own prox sense)."""
        if self.is_euclidean:
            return _euclidean_project(self, y)
        y = np.maximum(np.asarray(y, dtype=float), _TINY)
        return y / y.sum()

    def contains(self, x: np.ndarray, tol: float = 1e-12) -> bool:
        if self.region == "rn":
            return True
        if self.region == "box":
            return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))
        if self.region == "ball":
            return float(np.linalg.norm(x - self.center)) <= self.radius * (1 + tol)
        return bool(np.all(x >= -tol) and abs(x.sum() - 1.0) <= tol * max(1, self.dim))

    def barycenter(self) -> np.ndarray:
        return np.full(self.dim, 1.0 / self.dim)

    def random_point(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        """A random feasible point; entropy setups get strictly positive coordinates."""
        if self.region == "simplex":
            return rng.dirichlet(np.ones(self.dim))
        return self.project(rng.uniform(-scale, scale, self.dim))


def euclidean(dim: int) -> ProxSetup:
    return ProxSetup(EUCLIDEAN, "rn", dim)


def box(lo, hi, dim: Optional[int] = None) -> ProxSetup:
    if dim is None:
        dim = np.size(lo) if np.ndim(lo) else np.size(hi)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (dim,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (dim,)).copy()
    return ProxSetup(EUCLIDEAN, "box", dim, lo=lo, hi=hi)


def ball(center, radius: float) -> ProxSetup:
    center = np.asarray(center, dtype=float)
    return ProxSetup(EUCLIDEAN, "ball", center.size, center=center, radius=float(radius))


def entropy_simplex(dim: int) -> ProxSetup:
    return ProxSetup(ENTROPY, "simplex", dim)


def euclidean_simplex(dim: int) -> ProxSetup:
    return ProxSetup(EUCLIDEAN, "simplex", dim)


def _require_interior(x: np.ndarray) -> None:
    if np.any(x <= 0.0):
        bad = int(np.flatnonzero(x <= 0.0)[0])
        raise DomainError(f"entropy anchor must be strictly positive; coordinate {bad} is {x[bad]!r}")


def project_simplex(y: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, y.size + 1)
    rho = np.flatnonzero(u - css / k > 0)[-1]
    tau = css[rho] / (rho + 1)
    return np.maximum(y - tau, 0.0)


def _euclidean_project(setup: ProxSetup, y: np.ndarray) -> np.ndarray:
    if setup.region == "rn":
        return y
    if setup.region == "box":
        return np.clip(y, setup.lo, setup.hi)
    if setup.region == "ball":
        d = y - setup.center
        r = float(np.sqrt(d @ d))
        if r <= setup.radius:
            return y
        return setup.center + d * (setup.radius / r)
    return project_simplex(y)


def bregman(setup: ProxSetup, x: np.ndarray, z: np.ndarray) -> float:
    """``V(x, z) = omega(z) - omega(x) - <grad omega(x), z - x>``."""
    if setup.is_euclidean:
        d = z - x
        return 0.5 * float(d @ d)
    _require_interior(x)
    # sum z log(z/x) - z + x, with 0 log 0 = 0
    return float(np.sum(xlogy(z, z) - z * np.log(x) - z + x))


def composite_prox(setup: ProxSetup, linear: np.ndarray, anchor1: np.ndarray, w1: float,
                   anchor2: np.ndarray, w2: float,
                   tally: Optional[OracleTally] = None) -> np.ndarray:
    """Solve ``argmin_{x in X} <linear, x> + w1 V(anchor1, x) + w2 V(anchor2, x)``.

    A zero weight drops its anchor entirely, so that anchor may be arbitrary.
    """
    if w1 < 0 or w2 < 0:
        raise DomainError("prox weights must be nonnegative")
    wsum = w1 + w2
    if not wsum > 0:
        raise DomainError("at least one prox weight must be positive")
    if tally is not None:
        tally.prox_calls += 1

    if setup.is_euclidean:
        # the objective is (w1+w2)/2 ||x - c||^2 + const, so the answer is proj_X(c)
        c = -linear / wsum
        if w1 > 0:
            c = c + (w1 / wsum) * anchor1
        if w2 > 0:
            c = c + (w2 / wsum) * anchor2
        return _euclidean_project(setup, c)

    logits = -linear / wsum
    if w1 > 0:
        _require_interior(anchor1)
        logits = logits + (w1 / wsum) * np.log(anchor1)
    if w2 > 0:
        _require_interior(anchor2)
        logits = logits + (w2 / wsum) * np.log(anchor2)
    x = np.exp(logits - logsumexp(logits))
    if x.min() <= 0.0:
        x = np.maximum(x, _TINY)
        x /= x.sum()
    return x


def three_point_check(setup: ProxSetup, linear: np.ndarray, anchor1: np.ndarray, w1: float,
                      anchor2: np.ndarray, w2: float, probe: np.ndarray) -> float:
    """Slack of the three-point inequality for the composite prox at ``probe``.

    Returns ``phi(probe) - phi(u*) - (w1 + w2) V(u*, probe)`` with
    ``phi(x) = <linear, x> + w1 V(anchor1, x) + w2 V(anchor2, x)``. It is
    nonnegative up to rounding for every feasible probe.
    """
    u = composite_prox(setup, linear, anchor1, w1, anchor2, w2)

    def phi(x):
        val = float(linear @ x)
        if w1 > 0:
            val += w1 * bregman(setup, anchor1, x)
        if w2 > 0:
            val += w2 * bregman(setup, anchor2, x)
        return val

    return phi(probe) - phi(u) - (w1 + w2) * bregman(setup, u, probe)

"""Scalar step-coefficient recursions driving the accelerated loops.

Both the outer ``(gamma, Gamma, L)`` and inner ``(alpha, A, M)`` sequences obey

    Lambda_tau = E_tau * lambda_tau**2 = Lambda_{tau-1} * (1 - lambda_tau),   lambda_1 = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import DomainError


def next_coefficient(capital_lambda_prev: float, e_next: float) -> float:
    """Positive root of ``e_next * lam**2 = capital_lambda_prev * (1 - lam)``.

    Uses the rationalized form ``2 / (1 + sqrt(1 + 4 E / Lambda))`` which stays
    accurate when ``E / Lambda`` is huge.

    Examples
    --------
    >>> round(next_coefficient(1.0, 1.0), 10)
    0.6180339887
    """
    if not (capital_lambda_prev > 0 and e_next > 0):
        raise DomainError("next_coefficient needs positive arguments")
    return 2.0 / (1.0 + math.sqrt(1.0 + 4.0 * e_next / capital_lambda_prev))


def forced_weight(capital_lambda_prev: float, e_next: float, e_fix: float,
                  strict: bool = False) -> float:
    """Multiplier ``c`` on ``e_next`` that makes the next ``Lambda`` land on ``e_fix``.

    ``c = e_fix / ((1 - e_fix / Lambda_prev)**2 * e_next)``. Then the root
    ``lam`` of ``c e_next lam^2 = Lambda_prev (1 - lam)`` satisfies
    ``c e_next lam^2 = e_fix``.

    ``c >= 1`` holds whenever the unforced next value ``e_next * lam_nat**2`` is
    at most ``e_fix``. With ``strict=True`` that hypothesis is checked and a
    :class:`DomainError` raised when it fails.
    """
    if not (capital_lambda_prev > 0 and e_next > 0 and e_fix > 0):
        raise DomainError("forced_weight needs positive arguments")
    if e_fix >= capital_lambda_prev:
        raise DomainError(f"e_fix={e_fix!r} must lie strictly below Lambda_prev={capital_lambda_prev!r}")
    if strict:
        lam = next_coefficient(capital_lambda_prev, e_next)
        natural = e_next * lam * lam
        if natural > e_fix * (1.0 + 1e-12):
            raise DomainError(f"natural next value {natural!r} exceeds e_fix={e_fix!r}; forcing would need c < 1")
    gap = 1.0 - e_fix / capital_lambda_prev
    return e_fix / (gap * gap * e_next)


def termination_root_squared(alpha: float) -> float:
    """Square of the positive root ``r`` of ``r**2 = alpha**2 (1 - r)``.

    Algebraically equal to ``(a^4 + 2a^2 - a^3 sqrt(a^2 + 4)) / 2``; computed as
    ``(2a / (a + sqrt(a^2 + 4)))**2`` to avoid cancellation for small ``a``.
    """
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha!r}")
    r = 2.0 * alpha / (alpha + math.sqrt(alpha * alpha + 4.0))
    return r * r


@dataclass
class StepCoefficientState:
    """One point ``(lambda, Lambda, E, tau)`` of the recursion."""

    lam: float
    capital_lambda: float
    e_current: float
    tau: int = 1

    @classmethod
    def start(cls, e1: float) -> "StepCoefficientState":
        if not e1 > 0:
            raise DomainError("E_1 must be positive")
        return cls(1.0, float(e1), float(e1), 1)

    def advance(self, e_next: float) -> "StepCoefficientState":
        lam = next_coefficient(self.capital_lambda, e_next)
        return StepCoefficientState(lam, e_next * lam * lam, float(e_next), self.tau + 1)

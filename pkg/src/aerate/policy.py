"""Variance-minimizing assignment probabilities and the stabilized adaptive policy."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .errors import ConfigError, DegenerateInputError, DomainError

SOURCES = ("warmup", "adaptive", "fixed", "oracle")


@dataclass(frozen=True)
class PolicySnapshot:
    """Probability of assigning action 1 at one round, with its provenance."""

    pi1: float
    gamma_t: float
    source: str

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown policy source {self.source!r}")


def _sqrt_ratio(a: float, b: float) -> float:
    if a < 0 or b < 0:
        raise DomainError("moments must be non-negative")
    if a == 0 and b == 0:
        raise DegenerateInputError("both inputs are zero; the optimal probability is undefined")
    ra, rb = math.sqrt(a), math.sqrt(b)
    return ra / (ra + rb)


def optimal_pi_ipw(e1: float, e0: float) -> float:
    """Assignment probability minimizing the IPW variance: ``sqrt(e1) / (sqrt(e1) + sqrt(e0))``.

    ``e1``, ``e0`` are the conditional second moments E[Y(k)^2 | x].
    """
    return _sqrt_ratio(e1, e0)


def optimal_pi_aipw(v1: float, v0: float) -> float:
    """Assignment probability minimizing the AIPW variance: ``sqrt(v1) / (sqrt(v1) + sqrt(v0))``.

    ``v1``, ``v0`` are the conditional variances Var(Y(k) | x).
    """
    return _sqrt_ratio(v1, v0)


def variance_objective(q: float, e1: float, e0: float) -> float:
    """Per-covariate variance objective ``e1 / q + e0 / (1 - q)``."""
    if not 0.0 < q < 1.0:
        raise DomainError(f"q must lie in (0, 1), got {q}")
    return e1 / q + e0 / (1.0 - q)


# ---------------------------------------------------------------------------
# decay schedules shared by the policy mixing weight and the MA2IPW weight
# ---------------------------------------------------------------------------

_NAMED_RULES = {
    "inv_sqrt_t": Fraction(-1, 2),
    "inv_t": Fraction(-1),
    "inv_t2": Fraction(-2),
}
_POW_RE = re.compile(r"^t_pow\(\s*(-?[0-9.]+)\s*(?:/\s*([0-9.]+)\s*)?\)$")


def parse_rate(rule: str) -> float | None:
    """Exponent ``p`` of a ``t ** p`` rule, or None for the constant rules.

    Accepted spellings: ``inv_sqrt_t``, ``inv_t``, ``inv_t2``,
    ``t_pow(-1/1.5)``-style powers, ``zero`` and ``one``.
    """
    rule = rule.strip()
    if rule in ("zero", "one"):
        return None
    if rule in _NAMED_RULES:
        return float(_NAMED_RULES[rule])
    m = _POW_RE.match(rule.replace(" ", ""))
    if not m:
        raise ConfigError(f"unrecognized schedule {rule!r}")
    num = float(m.group(1))
    den = float(m.group(2)) if m.group(2) else 1.0
    if den == 0:
        raise ConfigError(f"zero denominator in schedule {rule!r}")
    p = num / den
    if p > 0:
        raise ConfigError(f"schedule {rule!r} must not grow with t")
    return p


def schedule(rule: str) -> Callable[[int], float]:
    """``t -> min(1, t ** p)`` for a decay rule; constant rules map to 0 or 1."""
    p = parse_rate(rule)
    if p is None:
        value = 0.0 if rule.strip() == "zero" else 1.0
        return lambda t: value
    return lambda t: min(1.0, float(t) ** p)


def gamma_at(t: int, rule: str = "inv_sqrt_t") -> float:
    return schedule(rule)(t)


def adaptive_pi(t: int, fv, gamma_rule: str | Callable[[int], float] = "inv_sqrt_t") -> PolicySnapshot:
    """Mix the estimated optimal probability with 1/2.

    ``fv`` is an :class:`~aerate.regressors.FvSnapshot` or a
    ``(f1, f0, nu1, nu0)`` tuple. The result is
    ``gamma_t / 2 + (1 - gamma_t) * sqrt(nu1) / (sqrt(nu1) + sqrt(nu0))``,
    which stays inside ``[gamma_t / 2, 1 - gamma_t / 2]``.
    """
    nu1, nu0 = (fv.nu1, fv.nu0) if hasattr(fv, "nu1") else (fv[2], fv[3])
    g = gamma_rule(t) if callable(gamma_rule) else gamma_at(t, gamma_rule)
    pi1 = 0.5 * g + (1.0 - g) * optimal_pi_aipw(nu1, nu0)
    return PolicySnapshot(pi1, g, "adaptive")

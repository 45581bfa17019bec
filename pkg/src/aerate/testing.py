"""Tests of H0: theta = mu against H1: theta != mu.

Three regimes are supported: a fixed-horizon z-test, Bonferroni-corrected
looks at scheduled rounds, and an anytime boundary of iterated-logarithm
shape,

    q_t = c * (log(1/alpha) + sqrt(2 S_t log(log(S_t) / alpha))),
    S_t = sum_i (h_i - mu)^2,

which rejects the first time ``|sum_i h_i - t mu| > q_t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError, DomainError

LIL_CONSTANT = 1.1
DEFAULT_LOOKS = (150, 250, 350, 450)
MODES = ("fixed", "bf", "lil")

# Rational approximation of the inverse normal CDF (P. J. Acklam)
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425
_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


def _acklam(p: float) -> float:
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return ((((( _C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
               ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    if p > 1.0 - _P_LOW:
        return -_acklam(1.0 - p)
    q = p - 0.5
    r = q * q
    return ((((( _A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
           ((((( _B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)


def normal_quantile(p: float) -> float:
    """Inverse standard-normal CDF: rational approximation plus one Newton step."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p}")
    if p == 0.5:
        return 0.0
    x = _acklam(p)
    density = math.exp(-0.5 * x * x) / _SQRT2PI
    if density > 0.0:
        x -= (normal_cdf(x) - p) / density
    return x


@dataclass(frozen=True)
class TestConfig:
    """Settings of one testing regime.

    ``looks`` are the rounds at which the Bonferroni regime tests; ``horizon``
    is the round of the fixed-horizon test.
    """

    __test__ = False  # not a pytest class

    alpha: float = 0.05
    mu: float = 0.0
    mode: str = "lil"
    looks: tuple[int, ...] = DEFAULT_LOOKS
    lil_constant: float = LIL_CONSTANT
    horizon: int | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.mode not in MODES:
            raise ConfigError(f"test mode must be one of {MODES}, got {self.mode!r}")
        looks = tuple(int(k) for k in self.looks)
        if any(b <= a for a, b in zip(looks, looks[1:])) or any(k < 2 for k in looks):
            raise ConfigError("looks must be strictly increasing rounds >= 2")
        object.__setattr__(self, "looks", looks)
        if self.lil_constant <= 0:
            raise ConfigError("lil_constant must be positive")


@dataclass(frozen=True)
class TestDecision:
    """Outcome of a test. ``boundary_or_pvalue`` holds a p-value for z-tests, q_t for the boundary."""

    __test__ = False

    rejected: bool
    at_round: int | None
    statistic: float
    boundary_or_pvalue: float


def z_test(theta_hat: float, mu: float, sigma_hat_sq: float, t: int, alpha: float = 0.05) -> TestDecision:
    """Two-sided test rejecting when ``|sqrt(t) (theta_hat - mu)| > sqrt(sigma_hat_sq) z_{1 - alpha/2}``."""
    if t < 2:
        raise DomainError("z_test needs t >= 2")
    if sigma_hat_sq < 0:
        raise DomainError("sigma_hat_sq must be non-negative")
    diff = math.sqrt(t) * (theta_hat - mu)
    if sigma_hat_sq == 0.0:
        if diff == 0.0:
            return TestDecision(False, None, 0.0, 1.0)
        return TestDecision(True, t, math.copysign(math.inf, diff), 0.0)
    z = diff / math.sqrt(sigma_hat_sq)
    p_value = 2.0 * normal_cdf(-abs(z))
    rejected = abs(z) > normal_quantile(1.0 - alpha / 2.0)
    return TestDecision(rejected, t if rejected else None, z, p_value)


def bonferroni_step(k: int, m: int, p_value: float, alpha: float = 0.05) -> bool:
    """Reject at look ``k`` of ``m`` iff ``p_value < alpha / m``."""
    if not 1 <= k <= m:
        raise DomainError(f"look index {k} outside 1..{m}")
    return p_value < alpha / m


def lil_boundary(alpha: float, sum_z_sq: float, constant: float = LIL_CONSTANT) -> float | None:
    """Anytime boundary ``q_t``; None (inactive) while ``sum_z_sq <= e``."""
    if sum_z_sq < 0:
        raise DomainError("sum_z_sq must be non-negative")
    if sum_z_sq <= math.e:
        return None
    inner = math.log(math.log(sum_z_sq) / alpha)
    return constant * (math.log(1.0 / alpha) + math.sqrt(2.0 * sum_z_sq * inner))


def lil_step(t: int, sum_h: float, mu: float, boundary: float | None) -> bool:
    """Reject iff the boundary is active and ``|sum_h - t mu| > boundary``."""
    if boundary is None:
        return False
    return abs(sum_h - t * mu) > boundary


# ---------------------------------------------------------------------------
# explicit concentration bound and sample size
# ---------------------------------------------------------------------------

_E = math.e
C1 = 6.0 * (_E - 2.0)


def c0(delta: float) -> float:
    """``3(e - 2) + 2 sqrt(173 / (2(e - 2))) log(4 / delta)``."""
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    return 3.0 * (_E - 2.0) + 2.0 * math.sqrt(173.0 / (2.0 * (_E - 2.0))) * math.log(4.0 / delta)


def theorem4_bound(delta: float, z_history, C: float, C4: float, c_abs: float = 1.0) -> float:
    """Finite-sample bound on ``|sum_i z_i|`` holding uniformly in t with probability ``1 - delta``.

    Parameters
    ----------
    delta : float
        Failure probability in (0, 1).
    z_history : iterable of float or float
        The centred increments observed so far, or directly ``sum z_i^2``.
    C : float
        Almost-sure bound on ``|z_i|``.
    C4 : float
        Almost-sure bound on the deviation of ``z_i^2`` from its conditional mean.
    c_abs : float
        The unspecified absolute constant scaling the variance proxy.

    Notes
    -----
    ``log log V`` is evaluated at ``max(V, e)`` so the bound stays defined
    during burn-in.
    """
    k0 = c0(delta)
    if C <= 0 or C4 < 0 or c_abs <= 0:
        raise DomainError("C and c_abs must be positive, C4 non-negative")
    s = float(z_history) if isinstance(z_history, (int, float)) else math.fsum(z * z for z in z_history)
    v = c_abs * (_E ** 4 / (4.0 * C * C) * s + 2.0 * k0 * C4 / _E ** 2)
    loglog = math.log(math.log(max(v, _E)))
    return 2.0 * C / _E ** 2 * (k0 + math.sqrt(2.0 * C1 * v * (loglog + math.log(4.0 / delta))))


def min_sample_size(delta_effect: float, alpha: float, beta: float, sigma_sq: float) -> int:
    """Smallest n with ``n >= sigma_sq / delta_effect^2 * (z_{1-alpha/2} - z_beta)^2``."""
    if delta_effect <= 0:
        raise DomainError("effect size must be positive")
    if not 0.0 < alpha < 1.0 or not 0.0 < beta < 1.0:
        raise DomainError("alpha and beta must lie in (0, 1)")
    if sigma_sq < 0:
        raise DomainError("sigma_sq must be non-negative")
    raw = sigma_sq / delta_effect ** 2 * (normal_quantile(1.0 - alpha / 2.0) - normal_quantile(beta)) ** 2
    return math.ceil(raw)


# ---------------------------------------------------------------------------
# per-trajectory bookkeeping used by the engine
# ---------------------------------------------------------------------------

@dataclass
class SequentialMonitor:
    """Tracks the anytime boundary and the Bonferroni looks for one increment stream."""

    alpha: float = 0.05
    mu: float = 0.0
    looks: tuple[int, ...] = DEFAULT_LOOKS
    lil_constant: float = LIL_CONSTANT
    lil_stop: int | None = None
    bf_stop: int | None = None
    look_decisions: list[bool] = field(default_factory=list)

    def step(self, t: int, estimate: float, sum_h: float, sum_z_sq: float, sigma_sq: float | None) -> float | None:
        """Feed round t; returns the active boundary (or None)."""
        q = lil_boundary(self.alpha, sum_z_sq, self.lil_constant)
        if self.lil_stop is None and lil_step(t, sum_h, self.mu, q):
            self.lil_stop = t
        if t in self.looks and sigma_sq is not None:
            p = z_test(estimate, self.mu, sigma_sq, t, self.alpha).boundary_or_pvalue
            k = self.looks.index(t) + 1
            hit = bonferroni_step(k, len(self.looks), p, self.alpha)
            self.look_decisions.append(hit)
            if hit and self.bf_stop is None:
                self.bf_stop = t
        return q

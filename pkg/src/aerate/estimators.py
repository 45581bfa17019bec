"""Online ATE estimators built from per-round increments.

Each round contributes

* an A2IPW increment ``h_t`` (AIPW score with pre-round regression
  predictions and the probability actually used),
* an AdaIPW increment (the IPW score under the same probability),
* optionally a DM term ``f_t(1, x_t) - f_t(0, x_t)`` evaluated after the
  regressor absorbed round t.

Averaging gives the A2IPW, AdaIPW and DM estimates; MA2IPW mixes AdaIPW into
A2IPW with a weight ``zeta_t`` that decays with t. Static IPW/AIPW under a
fixed probability are the same increments with a constant ``pi_used``.
"""

from __future__ import annotations

import math

import numpy as np

from . import dgp
from .dgp import DatasetSpec, Observation
from .errors import DomainError, EmptyStateError, InsufficientDataError
from .policy import optimal_pi_aipw, schedule

ESTIMATORS = ("a2ipw", "adaipw", "ma2ipw", "dm")
DEFAULT_ZETA_RULE = "t_pow(-1/1.5)"


def _check_pi(pi: float) -> None:
    if not 0.0 < pi < 1.0:
        raise DomainError(f"pi_used must lie in (0, 1), got {pi}")


def a2ipw_increment(obs: Observation, f1: float, f0: float) -> float:
    """AIPW score of one round.

    ``f1``, ``f0`` must be predictions made before the round's outcome was
    seen; otherwise the increments lose their martingale-difference property.
    """
    pi = obs.pi_used
    _check_pi(pi)
    if obs.a == 1:
        return (obs.y - f1) / pi + f1 - f0
    return -(obs.y - f0) / (1.0 - pi) + f1 - f0


def adaipw_increment(obs: Observation) -> float:
    """IPW score of one round under the recorded assignment probability."""
    pi = obs.pi_used
    _check_pi(pi)
    if obs.a == 1:
        return obs.y / pi
    return -obs.y / (1.0 - pi)


def oracle_pi(spec: DatasetSpec, x) -> float:
    """Variance-optimal probability of action 1 computed from the true conditional variances."""
    return optimal_pi_aipw(dgp.true_var(spec, 1, x), dgp.true_var(spec, 0, x))


def opt_oracle_increment(obs: Observation, spec: DatasetSpec) -> float:
    """A2IPW increment with the true regression function and the oracle probability."""
    pi = oracle_pi(spec, obs.x)
    if not math.isclose(obs.pi_used, pi, rel_tol=1e-12, abs_tol=1e-15):
        raise DomainError(f"observation was assigned with pi={obs.pi_used}, oracle pi is {pi}")
    f0, f1 = dgp.mean_outcomes(spec, obs.x)
    return a2ipw_increment(obs, float(f1[0]), float(f0[0]))


class RunningStream:
    """Running mean, dispersion and null-centred square sum of one increment stream."""

    __slots__ = ("null_mu", "n", "total", "mean", "m2", "sum_z", "sum_z_sq")

    def __init__(self, null_mu: float = 0.0):
        self.null_mu = null_mu
        self.n = 0
        self.total = 0.0
        self.mean = 0.0
        self.m2 = 0.0
        self.sum_z = 0.0
        self.sum_z_sq = 0.0

    def push(self, value: float) -> None:
        self.n += 1
        self.total += value
        delta = value - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (value - self.mean)
        z = value - self.null_mu
        self.sum_z += z
        self.sum_z_sq += z * z

    @property
    def estimate(self) -> float:
        return self.total / self.n

    @property
    def variance(self) -> float:
        """Empirical variance ``(1/n) sum (v_i - mean)^2``."""
        return max(self.m2, 0.0) / self.n


class EstimatorState:
    """Running sums for every estimator over one trial.

    Parameters
    ----------
    null_mu : float
        Null value of the tested hypothesis; ``z_t = h_t - null_mu``.
    zeta_rule : str
        Decay schedule of the MA2IPW mixing weight.
    keep_history : bool
        Keep the per-round increments (needed for exporting trajectories).
    """

    def __init__(self, null_mu: float = 0.0, zeta_rule: str = DEFAULT_ZETA_RULE, keep_history: bool = True):
        self.null_mu = float(null_mu)
        self.zeta_rule = zeta_rule
        self._zeta = schedule(zeta_rule)
        self.h = RunningStream(self.null_mu)
        self.ipw = RunningStream(self.null_mu)
        self.dm = RunningStream(self.null_mu)
        self.keep_history = keep_history
        self._hist_h: list[float] = []
        self._hist_ipw: list[float] = []

    @property
    def t(self) -> int:
        return self.h.n

    @property
    def sum_h(self) -> float:
        return self.h.total

    @property
    def sum_h_ipw(self) -> float:
        return self.ipw.total

    @property
    def dm_sum(self) -> float:
        return self.dm.total

    @property
    def z_sq_running(self) -> float:
        """``sum_i (h_i - null_mu)^2``."""
        return self.h.sum_z_sq

    @property
    def increments(self) -> np.ndarray:
        return np.asarray(self._hist_h)

    @property
    def ipw_increments(self) -> np.ndarray:
        return np.asarray(self._hist_ipw)

    def zeta(self, t: int | None = None) -> float:
        return self._zeta(self.t if t is None else t)

    def update(
        self,
        obs: Observation,
        f1: float,
        f0: float,
        *,
        dm_term: float | None = None,
        snapshot_round: int | None = None,
    ) -> float:
        """Absorb one round and return its A2IPW increment.

        ``snapshot_round``, when given, is the number of rounds the regressor
        had seen when ``f1``/``f0`` were predicted; it must equal the number
        of rounds absorbed so far.
        """
        if snapshot_round is not None and snapshot_round != self.t:
            raise DomainError(
                f"stale or future regression snapshot: taken after {snapshot_round} rounds, "
                f"estimator has absorbed {self.t}"
            )
        h = a2ipw_increment(obs, f1, f0)
        g = adaipw_increment(obs)
        self.h.push(h)
        self.ipw.push(g)
        if dm_term is not None:
            self.dm.push(dm_term)
        if self.keep_history:
            self._hist_h.append(h)
            self._hist_ipw.append(g)
        return h

    def estimates(self, zeta: float | None = None) -> dict[str, float]:
        """Current A2IPW, AdaIPW, MA2IPW and DM estimates (DM is nan if never fed)."""
        if self.t == 0:
            raise EmptyStateError("no rounds absorbed yet")
        a2 = self.h.estimate
        ada = self.ipw.estimate
        z = self.zeta() if zeta is None else zeta
        return {
            "a2ipw": a2,
            "adaipw": ada,
            "ma2ipw": z * ada + (1.0 - z) * a2,
            "dm": self.dm.estimate if self.dm.n else math.nan,
        }

    def sigma_hat_sq(self, stream: str = "a2ipw") -> float:
        """Empirical variance of the increments of ``stream``."""
        if self.t < 2:
            raise InsufficientDataError("sigma_hat_sq needs at least two rounds")
        return self.stream(stream).variance

    def stream(self, name: str) -> RunningStream:
        if name in ("a2ipw", "ma2ipw", "opt"):
            return self.h
        if name == "adaipw":
            return self.ipw
        if name == "dm":
            return self.dm
        raise KeyError(name)

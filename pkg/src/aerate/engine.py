"""The adaptive assignment loop and the baseline designs run through it.

Round t of the ``aerate`` design:

1. t = 1, 2: actions 0 then 1 are forced (recorded probability 1/2);
   for 3 <= t < rho the probability is 1/2.
2. otherwise the regressor, fitted on rounds 1..t-1, predicts means and
   floored variances at x_t, and the probability of action 1 mixes the
   variance-optimal ratio with 1/2.
3. ``A_t = 1[xi_t <= pi_t]`` for a uniform ``xi_t``; the outcome is revealed.
4. Estimators absorb the round using the pre-round predictions; the
   regressor then absorbs the round; sequential tests are updated.

Baselines: ``rct`` (probability 1/2 throughout, same forced start),
``fixed`` (constant probability), ``hahn`` (1/2 for n0 rounds, then a policy
and regression fit frozen at n0) and ``opt`` (true variances and regression
function).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import dgp
from .dgp import DatasetSpec, Observation
from .errors import ColdArmError, ConfigError
from .estimators import DEFAULT_ZETA_RULE, ESTIMATORS, EstimatorState, oracle_pi
from .policy import adaptive_pi, optimal_pi_aipw, parse_rate, schedule
from .regressors import DEFAULT_NU_FLOOR, METHODS, RegressorState
from .testing import SequentialMonitor, TestConfig, z_test

DESIGNS = ("aerate", "rct", "hahn", "opt", "fixed")
FORCED_START = ("aerate", "rct", "hahn")
ESTIMATOR_ALIASES = {"rct": "adaipw", "ipw": "adaipw", "aipw": "a2ipw"}
DEFAULT_RHO = 50


def resolve_estimator(name: str) -> str:
    name = ESTIMATOR_ALIASES.get(name, name)
    if name not in ESTIMATORS + ("opt",):
        raise ConfigError(f"unknown estimator {name!r}")
    return name


@dataclass(frozen=True)
class TrialConfig:
    """Everything that defines one trial except the dataset."""

    horizon: int = 500
    rho: int = DEFAULT_RHO
    design: str = "aerate"
    n0: int = 50
    fixed_pi: float = 0.5
    regressor: str = "nw"
    nu_floor: float = DEFAULT_NU_FLOOR
    clip_c3: float | None = None
    bandwidth_override: float | None = None
    k_override: int | None = None
    gamma_rule: str = "inv_sqrt_t"
    zeta_rule: str = DEFAULT_ZETA_RULE
    estimator: str = "a2ipw"
    test: TestConfig = field(default_factory=TestConfig)
    stop_on_reject: bool = False
    hahn_refit_f: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise ConfigError(f"design must be one of {DESIGNS}, got {self.design!r}")
        if self.horizon < 2:
            raise ConfigError("horizon must be at least 2")
        if self.design == "aerate" and not 2 <= self.rho <= self.horizon:
            raise ConfigError(f"rho must satisfy 2 <= rho <= T, got rho={self.rho}, T={self.horizon}")
        if self.design == "hahn" and not 2 <= self.n0 < self.horizon:
            raise ConfigError(f"hahn needs 2 <= n0 < T, got n0={self.n0}, T={self.horizon}")
        if not 0.0 < self.fixed_pi < 1.0:
            raise ConfigError("fixed_pi must lie in (0, 1)")
        if self.regressor not in METHODS:
            raise ConfigError(f"regressor must be one of {METHODS}, got {self.regressor!r}")
        parse_rate(self.gamma_rule)
        parse_rate(self.zeta_rule)
        object.__setattr__(self, "estimator", resolve_estimator(self.estimator))


class TrialStreams(NamedTuple):
    """Independent random streams of one trial."""

    covariates: np.random.Generator
    noise: np.random.Generator
    xi: np.random.Generator
    coefficients: np.random.Generator


def trial_streams(seed: int) -> TrialStreams:
    children = np.random.SeedSequence(int(seed)).spawn(4)
    return TrialStreams(*(np.random.default_rng(c) for c in children))


def assignment_draw(pi1: float, rng: np.random.Generator | None = None, *, xi: float | None = None) -> tuple[int, float]:
    """Return ``(1[xi <= pi1], xi)`` for ``xi ~ U[0, 1]`` drawn from ``rng`` unless given."""
    if xi is None:
        xi = float(rng.random())
    return int(xi <= pi1), xi


@dataclass
class TrialResult:
    """Trajectory and test outcomes of one trial.

    ``estimates[name][t-1]`` and ``variances[name][t-1]`` are the running
    estimate and increment variance after round t (variance is nan at t=1).
    Stopping times are None when the test never rejected.
    """

    design: str
    dataset: str
    theta0: float
    horizon: int
    rounds: int
    x: np.ndarray
    actions: np.ndarray
    outcomes: np.ndarray
    pi: np.ndarray
    xi: np.ndarray
    estimates: dict[str, np.ndarray]
    variances: dict[str, np.ndarray]
    sum_z_sq: np.ndarray
    boundary: np.ndarray
    lil_stop: dict[str, int | None]
    bf_stop: dict[str, int | None]
    look_decisions: dict[str, list[bool]]
    primary: str = "a2ipw"

    def final(self, name: str | None = None) -> float:
        return float(self.estimates[resolve_estimator(name or self.primary)][self.rounds - 1])

    def estimate_at(self, name: str, t: int) -> float:
        return float(self.estimates[resolve_estimator(name)][t - 1])

    def stopping_time(self, name: str, kind: str = "lil", cap: int | None = None) -> int:
        """Censored stopping time: the first rejecting round, else ``cap`` (default: horizon)."""
        name = resolve_estimator(name)
        stop = (self.lil_stop if kind == "lil" else self.bf_stop)[name]
        cap = self.horizon if cap is None else cap
        return cap if stop is None or stop > cap else stop

    def z_test_at(self, name: str, t: int, alpha: float = 0.05, mu: float = 0.0):
        name = resolve_estimator(name)
        return z_test(self.estimates[name][t - 1], mu, self.variances[name][t - 1], t, alpha)


def _pre_round_means(reg: RegressorState, x: np.ndarray) -> tuple[float, float]:
    f = [0.0, 0.0]
    for k in (0, 1):
        if reg.count(k):
            f[k] = reg.moments(k, x)[0]
    return f[1], f[0]


def run_trial(cfg: TrialConfig, spec: DatasetSpec, rng: TrialStreams | int | None = None) -> TrialResult:
    """Run one trial of ``cfg.design`` on ``spec``.

    ``rng`` may be prepared streams, an integer seed, or None (use ``cfg.seed``).
    """
    streams = rng if isinstance(rng, TrialStreams) else trial_streams(cfg.seed if rng is None else rng)
    T = cfg.horizon
    X, Y0, Y1 = dgp.sample_rounds(spec, T, streams.covariates, streams.noise)
    XI = streams.xi.random(T)
    design = cfg.design
    test = cfg.test
    gamma = schedule(cfg.gamma_rule)

    reg = None
    if design != "opt":
        reg = RegressorState(
            spec.dim, cfg.regressor, clip_c3=cfg.clip_c3, nu_floor=cfg.nu_floor,
            bandwidth_override=cfg.bandwidth_override, k_override=cfg.k_override, capacity=T,
        )
    frozen: RegressorState | None = None
    est = EstimatorState(test.mu, cfg.zeta_rule, keep_history=False)
    names = ESTIMATORS + (("opt",) if design == "opt" else ())
    monitors = {
        n: SequentialMonitor(test.alpha, test.mu, test.looks, test.lil_constant) for n in ESTIMATORS
    }

    actions = np.zeros(T, dtype=np.int8)
    outs = np.zeros(T)
    pis = np.zeros(T)
    xis = np.full(T, np.nan)
    traj = {n: np.full(T, np.nan) for n in ESTIMATORS}
    var_traj = {n: np.full(T, np.nan) for n in ESTIMATORS}
    zsq = np.zeros(T)
    bound = np.full(T, np.nan)
    primary = "a2ipw" if cfg.estimator == "opt" else cfg.estimator

    rounds = 0
    for i in range(T):
        t = i + 1
        x = X[i]
        forced = design in FORCED_START and t <= 2
        if design == "opt":
            pi1 = oracle_pi(spec, x)
            f0_arr, f1_arr = dgp.mean_outcomes(spec, x)
            f1, f0 = float(f1_arr[0]), float(f0_arr[0])
            token = est.t
        else:
            token = reg.n_obs
            if forced:
                pi1 = 0.5
                f1, f0 = _pre_round_means(reg, x)
            elif design == "aerate" and t >= cfg.rho:
                fv = reg.predict_fv(x)
                pi1 = adaptive_pi(t, fv, gamma).pi1
                f1, f0 = fv.f1, fv.f0
            elif design == "hahn" and t > cfg.n0:
                if frozen is None:
                    frozen = reg.copy()
                fv = frozen.predict_fv(x)
                pi1 = optimal_pi_aipw(fv.nu1, fv.nu0)
                f1, f0 = _pre_round_means(reg, x) if cfg.hahn_refit_f else (fv.f1, fv.f0)
            else:
                if t >= 3 and design in FORCED_START and 0 in reg.counts:
                    raise ColdArmError(reg.counts.index(0))
                pi1 = cfg.fixed_pi if design == "fixed" else 0.5
                f1, f0 = _pre_round_means(reg, x)

        if forced:
            a, xi = t - 1, math.nan
        else:
            a, xi = assignment_draw(pi1, xi=float(XI[i]))
        y = float(Y1[i] if a else Y0[i])
        obs = Observation(t, x, a, y, pi1, None if forced else xi)

        if reg is None:
            dm_term = f1 - f0
        else:
            reg.observe(x, a, y)
            g1, g0 = _pre_round_means(reg, x)
            dm_term = g1 - g0
        est.update(obs, f1, f0, dm_term=dm_term, snapshot_round=token)

        actions[i], outs[i], pis[i], xis[i] = a, y, pi1, xi
        values = est.estimates()
        for n in ESTIMATORS:
            stream = est.stream(n)
            sig = stream.variance if t >= 2 else None
            total = t * values[n] if n == "ma2ipw" else stream.total
            q = monitors[n].step(t, values[n], total, stream.sum_z_sq, sig)
            traj[n][i] = values[n]
            if sig is not None:
                var_traj[n][i] = sig
            if n == "a2ipw":
                zsq[i] = stream.sum_z_sq
                if q is not None:
                    bound[i] = q
        rounds = t
        if cfg.stop_on_reject:
            mon = monitors[primary]
            if (test.mode == "lil" and mon.lil_stop) or (test.mode == "bf" and mon.bf_stop):
                break

    n = rounds
    estimates = {k: v[:n] for k, v in traj.items()}
    variances = {k: v[:n] for k, v in var_traj.items()}
    lil = {k: m.lil_stop for k, m in monitors.items()}
    bf = {k: m.bf_stop for k, m in monitors.items()}
    looks = {k: list(m.look_decisions) for k, m in monitors.items()}
    if "opt" in names:
        for d in (estimates, variances, lil, bf, looks):
            d["opt"] = d["a2ipw"]
    return TrialResult(
        design=design, dataset=spec.name, theta0=dgp.true_ate(spec), horizon=T, rounds=n,
        x=X[:n], actions=actions[:n], outcomes=outs[:n], pi=pis[:n], xi=xis[:n],
        estimates=estimates, variances=variances, sum_z_sq=zsq[:n], boundary=bound[:n],
        lil_stop=lil, bf_stop=bf, look_decisions=looks, primary=primary,
    )


def run_hahn(cfg: TrialConfig, spec: DatasetSpec, rng: TrialStreams | int | None = None) -> TrialResult:
    """Two-stage baseline: equal probabilities for ``cfg.n0`` rounds, then a frozen fit."""
    if cfg.design != "hahn":
        cfg = _replace(cfg, design="hahn")
    return run_trial(cfg, spec, rng)


def _replace(cfg: TrialConfig, **changes) -> TrialConfig:
    from dataclasses import replace

    return replace(cfg, **changes)

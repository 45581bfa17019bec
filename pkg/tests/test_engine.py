from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from aerate import dgp
from aerate.dgp import Observation
from aerate.engine import TrialConfig, assignment_draw, run_hahn, run_trial, trial_streams
from aerate.errors import ConfigError
from aerate.estimators import a2ipw_increment
from aerate.policy import adaptive_pi, gamma_at
from aerate.regressors import RegressorState
from aerate.testing import TestConfig

D1 = dgp.make_synthetic(1)


def _same_trajectory(a, b):
    np.testing.assert_array_equal(a.actions, b.actions)
    np.testing.assert_array_equal(a.pi, b.pi)
    np.testing.assert_array_equal(a.outcomes, b.outcomes)
    for k in a.estimates:
        np.testing.assert_array_equal(a.estimates[k], b.estimates[k])
        np.testing.assert_array_equal(a.variances[k], b.variances[k])
    assert a.lil_stop == b.lil_stop and a.bf_stop == b.bf_stop


def test_two_rounds_force_both_actions():
    res = run_trial(TrialConfig(horizon=2, rho=2), D1, 0)
    assert res.actions.tolist() == [0, 1]
    assert res.pi.tolist() == [0.5, 0.5]
    assert np.isnan(res.xi).all()


def test_warmup_over_horizon_equals_rct():
    # warm-up covers t < rho, so with rho = T only the last round may adapt
    a = run_trial(TrialConfig(horizon=120, rho=120), D1, 3)
    b = run_trial(TrialConfig(horizon=119, design="rct"), D1, 3)
    assert (a.pi[:119] == 0.5).all()
    np.testing.assert_array_equal(a.actions[:119], b.actions)
    np.testing.assert_array_equal(a.estimates["a2ipw"][:119], b.estimates["a2ipw"])


def test_run_twice_identical():
    cfg = TrialConfig(horizon=200, seed=9)
    _same_trajectory(run_trial(cfg, D1), run_trial(cfg, D1))


def test_trajectory_lengths():
    res = run_trial(TrialConfig(horizon=80), D1, 1)
    assert res.rounds == 80
    assert all(len(v) == 80 for v in res.estimates.values())
    assert len(res.pi) == len(res.actions) == 80


def test_policy_and_increments_replayed_from_history():
    """pi_t and h_t only use rounds before t: replay them with a fresh regressor."""
    cfg = TrialConfig(horizon=150, rho=20)
    res = run_trial(cfg, D1, 5)
    reg = RegressorState(5, "nw")
    hs = []
    for i in range(res.rounds):
        t, x = i + 1, res.x[i]
        if t >= cfg.rho:
            fv = reg.predict_fv(x)
            assert res.pi[i] == adaptive_pi(t, fv).pi1  # bitwise
            f1, f0 = fv.f1, fv.f0
        else:
            assert res.pi[i] == 0.5
            f1 = reg.predict(1, x) if reg.count(1) else 0.0
            f0 = reg.predict(0, x) if reg.count(0) else 0.0
        o = Observation(t, x, int(res.actions[i]), float(res.outcomes[i]), float(res.pi[i]))
        hs.append(a2ipw_increment(o, f1, f0))
        reg.observe(x, o.a, o.y)
    np.testing.assert_allclose(res.estimates["a2ipw"], np.cumsum(hs) / np.arange(1, 151), rtol=1e-12)


def test_actions_follow_uniform_draws():
    res = run_trial(TrialConfig(horizon=200), D1, 2)
    free = ~np.isnan(res.xi)
    assert free.sum() == 198
    np.testing.assert_array_equal(res.actions[free], (res.xi[free] <= res.pi[free]).astype(int))


def test_inverse_propensity_bound():
    cfg = TrialConfig(horizon=300, rho=10)
    res = run_trial(cfg, D1, 4)
    worst = np.max(1.0 / np.minimum(res.pi, 1 - res.pi))
    assert worst <= 2.0 / gamma_at(300) + 1e-9


def test_rct_matches_static_estimators():
    res = run_trial(TrialConfig(horizon=100, design="rct"), D1, 6)
    a, y = res.actions, res.outcomes
    ipw = np.where(a == 1, y / 0.5, -y / 0.5)
    np.testing.assert_allclose(res.estimates["adaipw"], np.cumsum(ipw) / np.arange(1, 101), rtol=1e-12)


def test_opt_design_uses_oracle():
    res = run_trial(TrialConfig(horizon=100, design="opt"), D1, 6)
    assert np.all(res.pi == pytest.approx(0.8 / 1.1))
    # with the true regression function the DM estimate is exact
    assert res.final("dm") == pytest.approx(0.5)
    np.testing.assert_array_equal(res.estimates["opt"], res.estimates["a2ipw"])


def test_fixed_design():
    res = run_trial(TrialConfig(horizon=50, design="fixed", fixed_pi=0.3), D1, 1)
    assert (res.pi == 0.3).all()


def test_designs_share_environment():
    a = run_trial(TrialConfig(horizon=60), D1, 8)
    b = run_trial(TrialConfig(horizon=60, design="opt"), D1, 8)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.xi[2:], b.xi[2:])


def test_config_errors():
    with pytest.raises(ConfigError):
        TrialConfig(horizon=100, rho=101)
    with pytest.raises(ConfigError):
        TrialConfig(horizon=100, rho=1)
    with pytest.raises(ConfigError):
        TrialConfig(horizon=100, design="hahn", n0=100)
    with pytest.raises(ConfigError):
        TrialConfig(design="thompson")
    with pytest.raises(ConfigError):
        TrialConfig(estimator="median")


def test_hahn_freezes_policy_at_n0():
    cfg = TrialConfig(horizon=120, design="hahn", n0=50)
    res = run_hahn(cfg, D1, 7)
    assert (res.pi[:50] == 0.5).all()
    reg = RegressorState(5, "nw")
    for i in range(50):
        reg.observe(res.x[i], int(res.actions[i]), float(res.outcomes[i]))
    for i in range(50, 120):
        expected = adaptive_pi(i + 1, reg.predict_fv(res.x[i]), "zero").pi1
        assert res.pi[i] == pytest.approx(expected, rel=1e-15)


def test_hahn_refit_changes_only_increments():
    base = TrialConfig(horizon=120, design="hahn", n0=50)
    a = run_trial(base, D1, 7)
    b = run_trial(replace(base, hahn_refit_f=True), D1, 7)
    np.testing.assert_array_equal(a.pi, b.pi)
    assert not np.array_equal(a.estimates["a2ipw"], b.estimates["a2ipw"])


def test_stop_on_reject_truncates():
    cfg = TrialConfig(horizon=500, stop_on_reject=True, test=TestConfig(mode="lil"))
    res = run_trial(cfg, D1, 0)
    full = run_trial(replace(cfg, stop_on_reject=False), D1, 0)
    assert full.lil_stop["a2ipw"] is not None
    assert res.rounds == full.lil_stop["a2ipw"] == res.lil_stop["a2ipw"]
    assert res.stopping_time("a2ipw") == res.rounds


def test_stopping_time_censored():
    res = run_trial(TrialConfig(horizon=200), dgp.make_synthetic(2), 3)
    assert res.stopping_time("a2ipw", "lil") <= 200
    assert res.stopping_time("a2ipw", "lil", cap=100) <= 100


def test_assignment_draw():
    assert assignment_draw(1 - 1e-12, xi=0.5) == (1, 0.5)
    assert assignment_draw(0.3, xi=0.3) == (1, 0.3)
    rng = np.random.default_rng(0)
    n = 100_000
    hits = sum(assignment_draw(0.5, rng)[0] for _ in range(n))
    se = np.sqrt(0.25 / n)
    assert abs(hits / n - 0.5) < 4 * se


def test_trial_streams_independent_of_design():
    s1, s2 = trial_streams(4), trial_streams(4)
    assert s1.xi.random() == s2.xi.random()
    assert trial_streams(4).covariates.random() != trial_streams(4).noise.random()


def test_surface_trial_runs():
    cov = dgp.synthetic_ihdp_covariates(np.random.default_rng(0))
    streams = trial_streams(1)
    spec = dgp.make_dataset("surfaceB", rng=streams.coefficients, covariates=cov)
    res = run_trial(TrialConfig(horizon=100, regressor="knn"), spec, streams)
    assert np.isfinite(res.final())


@pytest.mark.slow
def test_hahn50_worse_than_aerate_on_dataset1():
    errs = {"aerate": [], "hahn": []}
    for i in range(200):
        for design in errs:
            res = run_trial(TrialConfig(horizon=300, design=design, n0=50), D1, i)
            errs[design].append((res.final() - 0.5) ** 2)
    assert np.mean(errs["hahn"]) > np.mean(errs["aerate"])

from __future__ import annotations

from pathlib import Path

import pytest

from aerate.config import load_bench, load_grid, load_trial
from aerate.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_single_trial_config():
    cfg, data = load_trial(CONFIGS / "single_trial.ini")
    assert (cfg.horizon, cfg.rho, cfg.design, cfg.seed) == (500, 50, "aerate", 1)
    assert cfg.test.mode == "lil"
    assert data["dataset"] == "synthetic1"
    assert load_trial(CONFIGS / "single_trial.ini", seed=9)[0].seed == 9


def test_bench_config():
    cfg = load_bench(CONFIGS / "dataset1_bench.ini", reps=3, workers=2)
    assert cfg.reps == 3 and cfg.workers == 2
    names = [c.name for c in cfg.cells]
    assert names[:2] == ["aerate-a2ipw-nw", "aerate-ma2ipw-nw"]
    assert "hahn100-a2ipw-nw" in names and "opt-opt" in names
    assert cfg.horizons == (150, 300) and cfg.t_cap == 500
    assert cfg.trial.test.looks == (150, 250, 350, 450)
    assert cfg.trial.zeta_rule == "t_pow(-1/1.5)"


def test_surface_config_paths():
    cfg = load_bench(CONFIGS / "surfaceB.ini")
    assert cfg.dataset == "surfaceB" and cfg.covariates_path is None and cfg.standardize


def test_relative_covariate_path(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[data]\ndataset = surfaceA\ncovariates = cov.csv\n")
    assert load_bench(p).covariates_path == str(tmp_path / "cov.csv")


def test_grid():
    grid = load_grid(CONFIGS / "sensitivity_grid.ini")
    assert grid == {"gamma_rule": ["inv_sqrt_t", "t_pow(-1/1.5)", "inv_t"], "rho": [10, 50]}


def test_optional_values(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[regressor]\nclip_c3 = auto\nk_override = 3\nbandwidth_override = 0.5\n")
    cfg, _ = load_trial(p)
    assert cfg.clip_c3 is None and cfg.k_override == 3 and cfg.bandwidth_override == 0.5


@pytest.mark.parametrize("text", ["[grid]\n", "[trial]\nT = 5\n", "[grid]\nrho =\n"])
def test_bad_grids(tmp_path, text):
    p = tmp_path / "g.ini"
    p.write_text(text)
    with pytest.raises(ConfigError):
        load_grid(p)

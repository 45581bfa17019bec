"""INI configuration files for the command line.

Example::

    [trial]
    T = 300
    rho = 50
    design = aerate
    seed = 1

    [regressor]
    method = nw

    [test]
    mode = lil
    alpha = 0.05

    [data]
    dataset = synthetic1

    [bench]
    reps = 200
    cells = aerate:a2ipw:nw, rct:adaipw, opt
    horizons = 150, 300

Unknown sections or keys are rejected so that typos do not silently fall
back to defaults.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from .engine import TrialConfig
from .errors import ConfigError
from .harness import BenchConfig, parse_cell
from .testing import TestConfig

_KEYS = {
    "trial": {"t", "horizon", "rho", "design", "seed", "n0", "fixed_pi", "stop_on_reject", "hahn_refit_f"},
    "estimator": {"name", "zeta_rule"},
    "regressor": {"method", "nu_floor", "clip_c3", "bandwidth_override", "k_override"},
    "policy": {"gamma_rule"},
    "test": {"alpha", "mu", "mode", "looks", "lil_constant", "horizon"},
    "data": {"dataset", "covariates", "header", "standardize"},
    "bench": {"reps", "cells", "horizons", "t_cap", "base_seed", "workers", "stopping", "trials_dir"},
    "grid": {"gamma_rule", "zeta_rule", "rho"},
}


def _read(path: str | Path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for section in parser.sections():
        if section not in _KEYS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        unknown = set(parser[section]) - _KEYS[section]
        if unknown:
            raise ConfigError(f"{path}: unknown keys in [{section}]: {', '.join(sorted(unknown))}")
    return parser


def _get(parser, section, key, conv, default=None):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key).strip()
    try:
        if conv is bool:
            return parser.getboolean(section, key)
        return conv(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {conv.__name__}") from None


def _list(raw: str) -> list[str]:
    return [p.strip() for p in raw.split(",") if p.strip()]


def _ints(raw: str) -> tuple[int, ...]:
    return tuple(int(p) for p in _list(raw))


def _optional_float(raw: str) -> float | None:
    return None if raw.lower() in ("", "none", "auto") else float(raw)


def _optional_int(raw: str) -> int | None:
    return None if raw.lower() in ("", "none", "auto") else int(raw)


def trial_from_parser(parser: configparser.ConfigParser, seed: int | None = None) -> TrialConfig:
    g = lambda s, k, c, d=None: _get(parser, s, k, c, d)  # noqa: E731
    looks = g("test", "looks", _ints)
    test = TestConfig(
        alpha=g("test", "alpha", float, 0.05),
        mu=g("test", "mu", float, 0.0),
        mode=g("test", "mode", str, "lil"),
        lil_constant=g("test", "lil_constant", float, 1.1),
        horizon=g("test", "horizon", int),
        **({"looks": looks} if looks is not None else {}),
    )
    horizon = g("trial", "t", int) or g("trial", "horizon", int, 500)
    fields = dict(
        horizon=horizon,
        rho=g("trial", "rho", int, TrialConfig.rho),
        design=g("trial", "design", str, "aerate"),
        n0=g("trial", "n0", int, 50),
        fixed_pi=g("trial", "fixed_pi", float, 0.5),
        stop_on_reject=g("trial", "stop_on_reject", bool, False),
        hahn_refit_f=g("trial", "hahn_refit_f", bool, False),
        seed=seed if seed is not None else g("trial", "seed", int, 0),
        regressor=g("regressor", "method", str, "nw"),
        nu_floor=g("regressor", "nu_floor", float, TrialConfig.nu_floor),
        clip_c3=g("regressor", "clip_c3", _optional_float),
        bandwidth_override=g("regressor", "bandwidth_override", _optional_float),
        k_override=g("regressor", "k_override", _optional_int),
        gamma_rule=g("policy", "gamma_rule", str, TrialConfig.gamma_rule),
        zeta_rule=g("estimator", "zeta_rule", str, TrialConfig.zeta_rule),
        estimator=g("estimator", "name", str, "a2ipw"),
        test=test,
    )
    return TrialConfig(**fields)


def load_trial(path: str | Path, seed: int | None = None) -> tuple[TrialConfig, dict]:
    """Trial settings plus the ``[data]`` options of a config file."""
    parser = _read(path)
    return trial_from_parser(parser, seed), data_options(parser, path)


def data_options(parser: configparser.ConfigParser, path: str | Path = ".") -> dict:
    cov = _get(parser, "data", "covariates", str)
    if cov:
        cov = str((Path(path).parent / cov).resolve()) if not Path(cov).is_absolute() else cov
    return {
        "dataset": _get(parser, "data", "dataset", str, "synthetic1"),
        "covariates_path": cov,
        "covariates_header": _get(parser, "data", "header", bool, False),
        "standardize": _get(parser, "data", "standardize", bool, True),
    }


def load_bench(path: str | Path, *, reps: int | None = None, workers: int | None = None) -> BenchConfig:
    parser = _read(path)
    trial = trial_from_parser(parser)
    g = lambda k, c, d=None: _get(parser, "bench", k, c, d)  # noqa: E731
    cells_raw = g("cells", str, "aerate:a2ipw:nw, rct:adaipw, opt")
    cells = tuple(parse_cell(tok) for tok in _list(cells_raw))
    return BenchConfig(
        cells=cells,
        reps=reps if reps is not None else g("reps", int, 200),
        horizons=g("horizons", _ints, (150, 300)),
        t_cap=g("t_cap", int, 500),
        base_seed=g("base_seed", int, 0),
        workers=workers if workers is not None else g("workers", int, 1),
        stopping=g("stopping", bool, True),
        trials_dir=g("trials_dir", str),
        trial=trial,
        **data_options(parser, path),
    )


def load_grid(path: str | Path) -> dict[str, list]:
    """``[grid]`` axes as lists; missing axes are absent from the result."""
    parser = _read(path)
    if not parser.has_section("grid"):
        raise ConfigError(f"{path}: missing [grid] section")
    grid: dict[str, list] = {}
    for key in ("gamma_rule", "zeta_rule", "rho"):
        if parser.has_option("grid", key):
            values = _list(parser.get("grid", key))
            if not values:
                raise ConfigError(f"{path}: [grid] {key} is empty")
            if key == "rho":
                try:
                    values = [int(v) for v in values]
                except ValueError:
                    raise ConfigError(f"{path}: [grid] rho must be integers") from None
            grid[key] = values
    if not grid:
        raise ConfigError(f"{path}: [grid] defines no axis")
    return grid

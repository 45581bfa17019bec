"""Monte Carlo replication of designs and estimators, with CSV and text reports.

Trial ``i`` of every cell uses seed ``base_seed + i``; cells that differ only
in the estimator share their trials, and distinct designs see the same
covariates and noise. Aggregation is a fold ordered by trial index, so the
report does not depend on how trials were spread over workers.
"""

from __future__ import annotations

import csv
import math
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product
from pathlib import Path

import numpy as np

from . import dgp
from .dgp import CovariateMatrix
from .engine import TrialConfig, resolve_estimator, run_trial, trial_streams
from .errors import ConfigError

COLUMNS = ("cell", "horizon", "mse", "std", "reject_pct", "lil_stop", "bf_stop")
FLOAT_FORMAT = ".6g"


@dataclass(frozen=True)
class Cell:
    """One report row group: a design, the estimator read off it, and the regressor.

    ``overrides`` are extra :class:`TrialConfig` fields (for example a
    different ``gamma_rule``) applied on top of the bench's base trial.
    """

    design: str
    estimator: str = "a2ipw"
    regressor: str = "nw"
    n0: int = 50
    fixed_pi: float = 0.5
    overrides: tuple[tuple[str, object], ...] = ()
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "estimator", resolve_estimator(self.estimator))

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        tag = {"hahn": f"hahn{self.n0}", "fixed": f"fixed{self.fixed_pi:g}"}.get(self.design, self.design)
        if self.design == "opt":
            return f"{tag}-{self.estimator}"
        return f"{tag}-{self.estimator}-{self.regressor}"

    def trial_key(self) -> tuple:
        """Cells with equal keys can be read off the same trials."""
        reg = None if self.design == "opt" else self.regressor
        n0 = self.n0 if self.design == "hahn" else None
        pi = self.fixed_pi if self.design == "fixed" else None
        return (self.design, reg, n0, pi, self.overrides)

    def trial_config(self, base: TrialConfig) -> TrialConfig:
        return replace(
            base, design=self.design, regressor=self.regressor, n0=self.n0,
            fixed_pi=self.fixed_pi, estimator=self.estimator, **dict(self.overrides),
        )


def parse_cell(token: str) -> Cell:
    """Parse ``design[:estimator[:regressor]]``; designs are ``aerate``, ``rct``, ``opt``, ``hahnN``, ``fixedP``."""
    parts = [p.strip() for p in token.strip().split(":")]
    if not parts[0] or len(parts) > 3:
        raise ConfigError(f"bad cell spec {token!r}")
    head = parts[0]
    kwargs: dict = {}
    if head.startswith("hahn") and head != "hahn":
        kwargs["n0"] = _parse_num(head[4:], int, token)
        head = "hahn"
    elif head.startswith("fixed") and head != "fixed":
        kwargs["fixed_pi"] = _parse_num(head[5:], float, token)
        head = "fixed"
    default_est = {"rct": "adaipw", "opt": "opt"}.get(head, "a2ipw")
    return Cell(
        head,
        parts[1] if len(parts) > 1 and parts[1] else default_est,
        parts[2] if len(parts) > 2 and parts[2] else "nw",
        **kwargs,
    )


def _parse_num(text: str, kind, token: str):
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(f"bad cell spec {token!r}") from None


@dataclass(frozen=True)
class BenchConfig:
    """Replication settings.

    ``t_cap`` is both the horizon of trials used for stopping times and the
    censoring value of trials that never reject. With ``stopping=False``
    trials only run to ``max(horizons)`` and stopping columns are nan.
    """

    cells: tuple[Cell, ...]
    reps: int = 200
    dataset: str = "synthetic1"
    horizons: tuple[int, ...] = (150, 300)
    t_cap: int = 500
    base_seed: int = 0
    workers: int = 1
    trial: TrialConfig = field(default_factory=TrialConfig)
    stopping: bool = True
    covariates_path: str | None = None
    covariates_header: bool = False
    standardize: bool = True
    trials_dir: str | None = None

    def __post_init__(self):
        if self.reps < 1:
            raise ConfigError("reps must be at least 1")
        if not self.cells:
            raise ConfigError("at least one cell is required")
        if not self.horizons or min(self.horizons) < 2:
            raise ConfigError("horizons must be rounds >= 2")
        if max(self.horizons) > self.t_cap:
            raise ConfigError(f"horizons must not exceed t_cap={self.t_cap}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.dataset not in dgp.DATASET_NAMES:
            raise ConfigError(f"unknown dataset {self.dataset!r}")
        names = [c.name for c in self.cells]
        if len(set(names)) != len(names):
            raise ConfigError("cell names must be unique")
        object.__setattr__(self, "horizons", tuple(sorted(set(int(h) for h in self.horizons))))

    @property
    def trial_horizon(self) -> int:
        return self.t_cap if self.stopping else max(self.horizons)


@dataclass(frozen=True)
class ReportRow:
    cell: str
    horizon: int
    mse: float
    std: float
    reject_pct: float
    lil_stop: float
    bf_stop: float

    @property
    def rejection_rate(self) -> float:
        return self.reject_pct / 100.0

    def values(self) -> tuple:
        return tuple(getattr(self, c) for c in COLUMNS)


@dataclass
class AggregateReport:
    """Rows ordered by cell then horizon; ``failures`` maps failed cells to diagnostics."""

    rows: list[ReportRow] = field(default_factory=list)
    failures: dict[str, str] = field(default_factory=dict)

    def row(self, cell: str, horizon: int) -> ReportRow:
        for r in self.rows:
            if r.cell == cell and r.horizon == horizon:
                return r
        raise KeyError((cell, horizon))

    def rounded(self) -> AggregateReport:
        """The report as it reads back from CSV."""
        rows = [
            ReportRow(r.cell, r.horizon, *(float(format(v, FLOAT_FORMAT)) for v in r.values()[2:]))
            for r in self.rows
        ]
        return AggregateReport(rows, dict(self.failures))


# ---------------------------------------------------------------------------
# running trials
# ---------------------------------------------------------------------------

@dataclass
class _TrialRecord:
    """Per-cell outputs of one trial, or the error that stopped it."""

    index: int
    sq_err: dict[str, list[float]] = field(default_factory=dict)
    reject: dict[str, list[bool]] = field(default_factory=dict)
    lil: dict[str, int] = field(default_factory=dict)
    bf: dict[str, int] = field(default_factory=dict)
    error: str | None = None


def _load_covariates(cfg: BenchConfig) -> CovariateMatrix | None:
    if cfg.dataset.startswith("synthetic"):
        return None
    rng = np.random.default_rng(np.random.SeedSequence([cfg.base_seed, 747]))
    return dgp.load_covariates(cfg.covariates_path, header=cfg.covariates_header,
                               synthetic_fallback=cfg.covariates_path is None, rng=rng)


def _run_chunk(args) -> list[_TrialRecord]:
    cfg, cells, trial_cfg, covariates, indices = args
    records = []
    for i in indices:
        rec = _TrialRecord(i)
        try:
            streams = trial_streams(cfg.base_seed + i)
            spec = dgp.make_dataset(cfg.dataset, rng=streams.coefficients, covariates=covariates,
                                    standardize=cfg.standardize)
            res = run_trial(replace(trial_cfg, seed=cfg.base_seed + i), spec, streams)
            mu = trial_cfg.test.mu
            for c in cells:
                est = res.estimates[c.estimator]
                rec.sq_err[c.name] = [(float(est[h - 1]) - res.theta0) ** 2 for h in cfg.horizons]
                rec.reject[c.name] = [
                    res.z_test_at(c.estimator, h, trial_cfg.test.alpha, mu).rejected for h in cfg.horizons
                ]
                if cfg.stopping:
                    rec.lil[c.name] = res.stopping_time(c.estimator, "lil", cfg.t_cap)
                    rec.bf[c.name] = res.stopping_time(c.estimator, "bf", cfg.t_cap)
        except Exception as exc:  # a failing trial marks its cells, the bench goes on
            last = traceback.extract_tb(exc.__traceback__)[-1]
            rec.error = f"trial {i}: {type(exc).__name__}: {exc} ({Path(last.filename).name}:{last.lineno})"
        records.append(rec)
    return records


def _chunks(n: int, workers: int) -> list[range]:
    size = max(1, math.ceil(n / (4 * workers)))
    return [range(s, min(n, s + size)) for s in range(0, n, size)]


def mse_std(sq_errors: list[float]) -> tuple[float, float]:
    """Mean and population standard deviation of per-trial squared errors."""
    m = math.fsum(sq_errors) / len(sq_errors)
    var = math.fsum((v - m) ** 2 for v in sq_errors) / len(sq_errors)
    return m, math.sqrt(var)


def run_bench(cfg: BenchConfig) -> AggregateReport:
    """Run ``cfg.reps`` trials per cell and aggregate MSE, STD, rejections and stopping times.

    MSE is the mean squared error of the estimate at each horizon, STD the
    standard deviation of the squared errors, ``reject_pct`` the percentage of
    fixed-horizon z-tests rejecting, and the stopping columns the mean of
    stopping times censored at ``t_cap``.
    """
    covariates = _load_covariates(cfg)
    base = replace(cfg.trial, horizon=cfg.trial_horizon, stop_on_reject=False)
    groups: dict[tuple, list[Cell]] = {}
    for c in cfg.cells:
        groups.setdefault(c.trial_key(), []).append(c)

    jobs = []
    failures: dict[str, str] = {}
    for cells in groups.values():
        try:
            trial_cfg = cells[0].trial_config(base)
        except (ConfigError, TypeError) as exc:
            for c in cells:
                failures[c.name] = f"config: {exc}"
            continue
        for chunk in _chunks(cfg.reps, cfg.workers):
            jobs.append((cfg, tuple(cells), trial_cfg, covariates, chunk))

    if cfg.workers == 1 or len(jobs) == 1:
        outputs = [_run_chunk(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outputs = list(pool.map(_run_chunk, jobs))

    per_cell: dict[str, list[_TrialRecord]] = {c.name: [] for c in cfg.cells}
    for job, records in zip(jobs, outputs):
        for c in job[1]:
            per_cell[c.name].extend(records)

    report = AggregateReport(failures=failures)
    nan = math.nan
    for c in cfg.cells:
        records = sorted(per_cell[c.name], key=lambda r: r.index)
        errors = [r.error for r in records if r.error]
        if c.name in failures or errors:
            if errors:
                failures[c.name] = f"{len(errors)}/{cfg.reps} trials failed; first: {errors[0]}"
            report.rows.extend(ReportRow(c.name, h, nan, nan, nan, nan, nan) for h in cfg.horizons)
            continue
        if cfg.trials_dir:
            _write_trials(Path(cfg.trials_dir) / f"{c.name}.csv", c.name, records, cfg)
        if cfg.stopping:
            lil = math.fsum(r.lil[c.name] for r in records) / len(records)
            bf = math.fsum(r.bf[c.name] for r in records) / len(records)
        else:
            lil = bf = nan
        for j, h in enumerate(cfg.horizons):
            mse, std = mse_std([r.sq_err[c.name][j] for r in records])
            pct = 100.0 * sum(r.reject[c.name][j] for r in records) / len(records)
            report.rows.append(ReportRow(c.name, h, mse, std, pct, lil, bf))
    return report


def _write_trials(path: Path, cell: str, records: list[_TrialRecord], cfg: BenchConfig) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "seed"]
                   + [f"sq_err_{h}" for h in cfg.horizons]
                   + [f"reject_{h}" for h in cfg.horizons]
                   + ["lil_stop", "bf_stop"])
        for r in records:
            w.writerow([r.index, cfg.base_seed + r.index]
                       + [repr(v) for v in r.sq_err[cell]]
                       + [int(v) for v in r.reject[cell]]
                       + [r.lil.get(cell, ""), r.bf.get(cell, "")])


def read_trials(path: str | Path) -> dict[str, list]:
    """Columns of a per-trial CSV written by :func:`run_bench` with ``trials_dir``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return {}
    out: dict[str, list] = {}
    for key in rows[0]:
        conv = float if key.startswith("sq_err_") else (lambda s: int(s) if s else None)
        out[key] = [conv(r[key]) for r in rows]
    return out


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def emit_report(report: AggregateReport, path: str | Path) -> None:
    """Write ``report`` as CSV with columns ``cell, horizon, mse, std, reject_pct, lil_stop, bf_stop``.

    Floats are written with 6 significant digits; :meth:`AggregateReport.rounded`
    is what reads back.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in report.rows:
            w.writerow([r.cell, r.horizon] + [format(v, FLOAT_FORMAT) for v in r.values()[2:]])


def read_report(path: str | Path) -> AggregateReport:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != COLUMNS:
            raise ConfigError(f"{path}: not a report (header {header})")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(COLUMNS):
                raise ConfigError(f"{path}: line {lineno} has {len(rec)} fields")
            try:
                rows.append(ReportRow(rec[0], int(rec[1]), *(float(v) for v in rec[2:])))
            except ValueError as exc:
                raise ConfigError(f"{path}: line {lineno}: {exc}") from None
    return AggregateReport(rows)


def _fmt(v: float, spec: str) -> str:
    return "-" if math.isnan(v) else format(v, spec)


def render_table(report: AggregateReport) -> str:
    """Aligned text table: one line per cell, MSE/STD/Testing per horizon, then LIL and BF."""
    horizons = sorted({r.horizon for r in report.rows})
    cells = list(dict.fromkeys(r.cell for r in report.rows))
    header = ["cell"]
    for h in horizons:
        header += [f"MSE@{h}", f"STD@{h}", f"Test%@{h}"]
    header += ["LIL", "BF"]
    lines = [header]
    for c in cells:
        line = [c]
        last = None
        for h in horizons:
            try:
                r = report.row(c, h)
            except KeyError:
                line += ["", "", ""]
                continue
            last = r
            line += [_fmt(r.mse, ".3f"), _fmt(r.std, ".3f"), _fmt(r.reject_pct, ".1f")]
        line += [_fmt(last.lil_stop, ".1f"), _fmt(last.bf_stop, ".1f")] if last else ["", ""]
        lines.append(line)
    widths = [max(len(row[i]) for row in lines) for i in range(len(header))]
    out = []
    for k, row in enumerate(lines):
        out.append("  ".join(s.ljust(widths[0]) if i == 0 else s.rjust(widths[i]) for i, s in enumerate(row)))
        if k == 0:
            out.append("-" * len(out[0]))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# hyperparameter sweep
# ---------------------------------------------------------------------------

def sensitivity_sweep(
    base: BenchConfig,
    gamma_rules=None,
    zeta_rules=None,
    rhos=None,
) -> AggregateReport:
    """Bench every ``aerate`` cell at each point of ``gamma_rule x zeta_rule x rho``.

    Omitted axes keep the base trial's value. Other cells run once. Every grid
    point uses the same seeds, and cell names only gain a suffix for the axes
    that take more than one value.
    """
    t = base.trial
    axes = {
        "gamma_rule": list(gamma_rules) if gamma_rules else [t.gamma_rule],
        "zeta_rule": list(zeta_rules) if zeta_rules else [t.zeta_rule],
        "rho": [int(r) for r in rhos] if rhos else [t.rho],
    }
    varying = [k for k, v in axes.items() if len(v) > 1]
    cells: list[Cell] = []
    for c in base.cells:
        if c.design != "aerate":
            cells.append(c)
            continue
        for point in product(*axes.values()):
            values = dict(zip(axes, point))
            over = dict(c.overrides)
            over.update(values)
            suffix = "".join(f"[{k}={values[k]}]" for k in varying)
            label = c.name + suffix if suffix else c.label
            cells.append(replace(c, overrides=tuple(sorted(over.items())), label=label))
    return run_bench(replace(base, cells=tuple(cells)))


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)

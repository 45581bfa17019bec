"""Data-generating processes: synthetic Gaussian datasets and IHDP-style response surfaces.

Every dataset exposes its oracle quantities (conditional means, conditional
variances, the true ATE) so that baselines such as the oracle design and the
Monte Carlo checks can use them directly.

Synthetic datasets 1-4 draw ``X ~ N(0, I_5)`` and

    Y(d) = mu_d + sum_j X_j + e_d,    e_d ~ N(0, std_d^2)  (independent of X)

Response surfaces A and B use a 25-column covariate matrix (6 continuous and
19 binary columns) and Gaussian unit-variance noise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataParseError, ShapeError

SYNTHETIC_DIM = 5
IHDP_DIM = 25
IHDP_ROWS = 747
IHDP_CONTINUOUS = 6

# (mu1, mu0, std1, std0)
SYNTHETIC_PARAMS: dict[int, tuple[float, float, float, float]] = {
    1: (0.8, 0.3, 0.8, 0.3),
    2: (0.5, 0.5, 0.8, 0.3),
    3: (0.8, 0.3, 0.6, 0.4),
    4: (0.5, 0.5, 0.6, 0.4),
}

SURFACE_A_VALUES = (0.0, 1.0, 2.0, 3.0, 4.0)
SURFACE_A_PROBS = (0.5, 0.2, 0.15, 0.1, 0.05)
SURFACE_B_VALUES = (0.0, 0.1, 0.2, 0.3, 0.4)
SURFACE_B_PROBS = (0.6, 0.1, 0.1, 0.1, 0.1)
SURFACE_A_EFFECT = 4.0
SURFACE_B_TARGET_ATT = 4.0
SURFACE_B_OFFSET = 0.5

DATASET_NAMES = ("synthetic1", "synthetic2", "synthetic3", "synthetic4", "surfaceA", "surfaceB")


@dataclass(frozen=True, eq=False)
class CovariateMatrix:
    """Covariate rows with a mask of the columns that only hold 0/1 values."""

    values: np.ndarray
    binary_mask: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        mask = np.asarray(self.binary_mask, dtype=bool)
        if values.ndim != 2:
            raise ShapeError(f"covariates must be 2-D, got shape {values.shape}")
        if mask.shape != (values.shape[1],):
            raise ShapeError("binary_mask length must equal the number of columns")
        binary = values[:, mask]
        if binary.size and not np.all((binary == 0.0) | (binary == 1.0)):
            raise ShapeError("binary-masked columns contain values other than 0/1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "binary_mask", mask)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_values(cls, values) -> CovariateMatrix:
        """Build a matrix and infer which columns are binary."""
        values = np.asarray(values, dtype=float)
        if values.ndim != 2:
            raise ShapeError(f"covariates must be 2-D, got shape {values.shape}")
        mask = np.all((values == 0.0) | (values == 1.0), axis=0)
        return cls(values, mask)

    def standardized(self) -> CovariateMatrix:
        """Z-score the non-binary columns; binary columns are left as 0/1."""
        out = self.values.copy()
        cont = ~self.binary_mask
        if np.any(cont):
            block = out[:, cont]
            sd = block.std(axis=0)
            sd[sd == 0.0] = 1.0
            out[:, cont] = (block - block.mean(axis=0)) / sd
        return CovariateMatrix(out, self.binary_mask.copy())


@dataclass(frozen=True, eq=False)
class Observation:
    """One round's record. Only the realized outcome is kept.

    ``pi_used`` is the probability with which action 1 was assigned and
    ``xi`` the uniform draw compared against it (None when the action was
    forced).
    """

    t: int
    x: np.ndarray
    a: int
    y: float
    pi_used: float
    xi: float | None = None

    def __post_init__(self):
        if self.t < 1:
            raise ValueError(f"round index must be >= 1, got {self.t}")
        if self.a not in (0, 1):
            raise ValueError(f"action must be 0 or 1, got {self.a!r}")


@dataclass(frozen=True, eq=False)
class DatasetSpec:
    """A time-invariant covariate law and potential-outcome law.

    For synthetic kinds ``ident`` is 1..4 and the ``mu``/``std`` fields are
    used. Surfaces carry the coefficient vector ``beta``, the normalizer
    ``offset_q`` (surface B only) and the covariate rows they resample.
    """

    kind: str
    dim: int
    ident: int | None = None
    mu1: float = 0.0
    mu0: float = 0.0
    std1: float = 1.0
    std0: float = 1.0
    beta: np.ndarray | None = None
    offset_q: float = 0.0
    covariates: CovariateMatrix | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("synthetic", "surfaceA", "surfaceB"):
            raise ConfigError(f"unknown dataset kind {self.kind!r}")
        if self.kind == "synthetic":
            if not (self.std1 > 0 and self.std0 > 0):
                raise ConfigError("synthetic datasets need std1 > 0 and std0 > 0")
        else:
            if self.covariates is None or self.beta is None:
                raise ConfigError("response surfaces need covariates and beta")
            if self.covariates.cols != self.dim or len(self.beta) != self.dim:
                raise ShapeError("surface dimension mismatch")

    @property
    def name(self) -> str:
        return f"synthetic{self.ident}" if self.kind == "synthetic" else self.kind

    @property
    def is_synthetic(self) -> bool:
        return self.kind == "synthetic"


def make_synthetic(ident: int) -> DatasetSpec:
    """Return synthetic dataset ``ident`` (1..4)."""
    if ident not in SYNTHETIC_PARAMS:
        raise ConfigError(f"synthetic dataset id must be one of 1..4, got {ident!r}")
    mu1, mu0, std1, std0 = SYNTHETIC_PARAMS[ident]
    return DatasetSpec("synthetic", SYNTHETIC_DIM, ident, mu1, mu0, std1, std0)


# ---------------------------------------------------------------------------
# oracle quantities
# ---------------------------------------------------------------------------

def mean_outcomes(spec: DatasetSpec, X) -> tuple[np.ndarray, np.ndarray]:
    """Conditional means ``(f*(0, X), f*(1, X))`` for a batch of rows."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != spec.dim:
        raise ShapeError(f"expected {spec.dim} covariates, got {X.shape[1]}")
    if spec.kind == "synthetic":
        s = X.sum(axis=1)
        return spec.mu0 + s, spec.mu1 + s
    lin = X @ spec.beta
    if spec.kind == "surfaceA":
        return lin, lin + SURFACE_A_EFFECT
    return np.exp((X + SURFACE_B_OFFSET) @ spec.beta), lin - spec.offset_q


def noise_scales(spec: DatasetSpec) -> tuple[float, float]:
    """Noise standard deviations ``(std0, std1)``."""
    if spec.kind == "synthetic":
        return spec.std0, spec.std1
    return 1.0, 1.0


def true_f(spec: DatasetSpec, k: int, x) -> float:
    """E[Y(k) | x]."""
    f0, f1 = mean_outcomes(spec, x)
    return float(f1[0] if k == 1 else f0[0])


def true_var(spec: DatasetSpec, k: int, x=None) -> float:
    """Var(Y(k) | x); constant in x for every dataset here."""
    s0, s1 = noise_scales(spec)
    return (s1 if k == 1 else s0) ** 2


def true_ate(spec: DatasetSpec) -> float:
    """The average treatment effect under the dataset's covariate law."""
    if spec.kind == "synthetic":
        return spec.mu1 - spec.mu0
    if spec.kind == "surfaceA":
        return SURFACE_A_EFFECT
    f0, f1 = mean_outcomes(spec, spec.covariates.values)
    return float(np.mean(f1 - f0))


def outcomes(spec: DatasetSpec, x, noise0: float = 0.0, noise1: float = 0.0) -> tuple[float, float]:
    """Potential outcomes at ``x`` given standard-normal noise draws."""
    f0, f1 = mean_outcomes(spec, x)
    s0, s1 = noise_scales(spec)
    return float(f0[0] + s0 * noise0), float(f1[0] + s1 * noise1)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def sample_round(spec: DatasetSpec, rng: np.random.Generator) -> tuple[np.ndarray, float, float]:
    """Draw one covariate and both potential outcomes.

    The caller selects the realized outcome from the assigned action; the
    counterfactual is never meant to leave the simulator.
    """
    if spec.kind == "synthetic":
        x = rng.standard_normal(spec.dim)
    else:
        x = spec.covariates.values[rng.integers(spec.covariates.rows)].copy()
    e0, e1 = rng.standard_normal(2)
    y0, y1 = outcomes(spec, x, e0, e1)
    return x, y0, y1


def sample_rounds(
    spec: DatasetSpec,
    n: int,
    cov_rng: np.random.Generator,
    noise_rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw ``n`` rounds at once: covariates ``(n, dim)`` and outcomes ``y0``, ``y1``.

    Covariates and noise come from separate streams so that designs run on the
    same seed see the same environment. Surfaces resample covariate rows
    without replacement while ``n`` fits in the matrix, with replacement
    otherwise.
    """
    if spec.kind == "synthetic":
        X = cov_rng.standard_normal((n, spec.dim))
    else:
        rows = spec.covariates.rows
        idx = cov_rng.choice(rows, size=n, replace=n > rows)
        X = spec.covariates.values[idx]
    noise = noise_rng.standard_normal((n, 2))
    f0, f1 = mean_outcomes(spec, X)
    s0, s1 = noise_scales(spec)
    return X, f0 + s0 * noise[:, 0], f1 + s1 * noise[:, 1]


# ---------------------------------------------------------------------------
# IHDP-style covariates and response surfaces
# ---------------------------------------------------------------------------

def synthetic_ihdp_covariates(rng: np.random.Generator, rows: int = IHDP_ROWS) -> CovariateMatrix:
    """Schema-compatible stand-in for the IHDP covariates.

    6 standard-normal columns followed by 19 Bernoulli(0.5) columns.
    """
    cont = rng.standard_normal((rows, IHDP_CONTINUOUS))
    binary = (rng.random((rows, IHDP_DIM - IHDP_CONTINUOUS)) < 0.5).astype(float)
    mask = np.r_[np.zeros(IHDP_CONTINUOUS, bool), np.ones(IHDP_DIM - IHDP_CONTINUOUS, bool)]
    return CovariateMatrix(np.hstack([cont, binary]), mask)


def load_covariates(
    path: str | Path | None,
    *,
    header: bool = False,
    synthetic_fallback: bool = False,
    rng: np.random.Generator | None = None,
) -> CovariateMatrix:
    """Read a 25-column comma-separated covariate file.

    If ``path`` is None (or missing) and ``synthetic_fallback`` is set, a
    747-row synthetic matrix is generated from ``rng`` instead.
    """
    if path is None or not Path(path).exists():
        if synthetic_fallback:
            return synthetic_ihdp_covariates(rng if rng is not None else np.random.default_rng(0))
        raise FileNotFoundError(f"covariate file not found: {path}")

    rows: list[list[float]] = []
    with open(path, newline="") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            if header and lineno == 1:
                continue
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != IHDP_DIM:
                raise ShapeError(f"line {lineno}: expected {IHDP_DIM} columns, got {len(record)}")
            try:
                rows.append([float(c) for c in record])
            except ValueError as exc:
                raise DataParseError(f"non-numeric cell ({exc})", line=lineno) from None
    if not rows:
        raise ShapeError(f"{path}: no data rows")
    return CovariateMatrix.from_values(np.array(rows))


def _draw_beta(kind: str, rng: np.random.Generator, dim: int) -> np.ndarray:
    if kind == "A":
        return rng.choice(SURFACE_A_VALUES, size=dim, p=SURFACE_A_PROBS)
    return rng.choice(SURFACE_B_VALUES, size=dim, p=SURFACE_B_PROBS)


def make_surface(
    kind: str,
    covariates: CovariateMatrix,
    rng: np.random.Generator,
    *,
    standardize: bool = True,
    treated=None,
    beta=None,
) -> DatasetSpec:
    """Build response surface ``"A"`` or ``"B"`` over ``covariates``.

    Surface A: ``Y(0) ~ N(X b, 1)``, ``Y(1) ~ N(X b + 4, 1)``.
    Surface B: ``Y(0) ~ N(exp((X + 0.5) b), 1)``, ``Y(1) ~ N(X b - q, 1)`` with
    ``q`` set so the mean effect over the ``treated`` rows (all rows by
    default) is 4.

    Parameters
    ----------
    standardize : bool
        Z-score the continuous columns first. Raw sums overflow ``exp`` on
        real covariate scales.
    treated : array-like of bool, optional
        Row mask defining the treated group used to normalize surface B.
    beta : array-like, optional
        Use these coefficients instead of drawing them.
    """
    kind = kind.upper().removeprefix("SURFACE")
    if kind not in ("A", "B"):
        raise ConfigError(f"surface kind must be 'A' or 'B', got {kind!r}")
    if covariates.cols != IHDP_DIM:
        raise ShapeError(f"surfaces need {IHDP_DIM} covariate columns, got {covariates.cols}")
    cov = covariates.standardized() if standardize else covariates
    b = np.asarray(beta, dtype=float) if beta is not None else _draw_beta(kind, rng, IHDP_DIM)
    if b.shape != (IHDP_DIM,):
        raise ShapeError(f"beta must have {IHDP_DIM} entries")
    if kind == "A":
        return DatasetSpec("surfaceA", IHDP_DIM, beta=b, covariates=cov)

    X = cov.values
    mask = np.ones(cov.rows, bool) if treated is None else np.asarray(treated, bool)
    if mask.shape != (cov.rows,) or not mask.any():
        raise ShapeError("treated mask must select at least one covariate row")
    gap = X @ b - np.exp((X + SURFACE_B_OFFSET) @ b)
    q = float(np.mean(gap[mask]) - SURFACE_B_TARGET_ATT)
    return DatasetSpec("surfaceB", IHDP_DIM, beta=b, offset_q=q, covariates=cov)


def make_dataset(
    name: str,
    *,
    rng: np.random.Generator | None = None,
    covariates: CovariateMatrix | None = None,
    standardize: bool = True,
) -> DatasetSpec:
    """Resolve a config name (``synthetic1`` .. ``synthetic4``, ``surfaceA``, ``surfaceB``)."""
    if name.startswith("synthetic"):
        try:
            ident = int(name.removeprefix("synthetic"))
        except ValueError:
            raise ConfigError(f"unknown dataset {name!r}") from None
        return make_synthetic(ident)
    if name in ("surfaceA", "surfaceB"):
        if covariates is None:
            raise ConfigError(f"{name} needs a covariate matrix")
        return make_surface(name[-1], covariates, rng if rng is not None else np.random.default_rng(0),
                            standardize=standardize)
    raise ConfigError(f"unknown dataset {name!r}; expected one of {', '.join(DATASET_NAMES)}")

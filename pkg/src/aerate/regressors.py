"""Per-arm nonparametric regression of E[Y(k)|x] and E[Y(k)^2|x].

Samples arrive adaptively, one round at a time, and are stored per arm in
arrival order. Two estimators are available:

* K-nearest neighbours with ``k_n = max(1, floor(sqrt(N_k)))`` under the
  Euclidean distance; ties are broken by earlier arrival.
* Nadaraya-Watson with a Gaussian kernel and a Scott-style bandwidth
  ``h = s * N_k ** (-1 / (d + 4))``, ``s`` being the mean per-coordinate
  sample standard deviation of the arm's covariates.

Predictions are clipped to ``[-C3, C3]`` (first moment) and ``[0, C3**2]``
(second moment).
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np

from .errors import ColdArmError, ConfigError, ShapeError

METHODS = ("knn", "nw")
MOMENTS = ("first", "second")
DEFAULT_NU_FLOOR = 0.01
BANDWIDTH_FLOOR = 1e-6
WEIGHT_FLOOR = 1e-12


@dataclass(frozen=True)
class FvSnapshot:
    """Pre-round predictions at one covariate.

    ``n_obs`` is the number of rounds the regressor had absorbed when the
    snapshot was taken; the engine checks it to prove the snapshot predates
    the outcome it is paired with.
    """

    f1: float
    f0: float
    nu1: float
    nu0: float
    n_obs: int


def floored_variance(second: float, first: float, nu_floor: float = DEFAULT_NU_FLOOR) -> float:
    """``max(nu_floor, second - first**2)``."""
    return max(nu_floor, second - first * first)


class _ArmStore:
    __slots__ = ("X", "y", "n", "mean", "m2", "_sd")

    def __init__(self, dim: int, capacity: int):
        self.X = np.empty((capacity, dim))
        self.y = np.empty(capacity)
        self.n = 0
        # Welford accumulators for the covariate spread used by the bandwidth
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)
        self._sd = BANDWIDTH_FLOOR

    def append(self, x: np.ndarray, y: float) -> None:
        if self.n == len(self.y):
            cap = max(16, 2 * len(self.y))
            X = np.empty((cap, self.X.shape[1]))
            X[: self.n] = self.X[: self.n]
            yy = np.empty(cap)
            yy[: self.n] = self.y[: self.n]
            self.X, self.y = X, yy
        self.X[self.n] = x
        self.y[self.n] = y
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)
        if self.n >= 2:
            sd = float(np.sqrt(np.maximum(self.m2, 0.0) / (self.n - 1)).mean())
            self._sd = max(sd, BANDWIDTH_FLOOR)

    def mean_sd(self) -> float:
        """Mean per-coordinate sample standard deviation, floored."""
        return self._sd


class RegressorState:
    """Sample store for both arms plus K-NN / Nadaraya-Watson prediction.

    Parameters
    ----------
    dim : int
        Covariate dimension.
    method : {"knn", "nw"}
        Estimator used by :meth:`predict` and :meth:`predict_fv`.
    clip_c3 : float, optional
        Fixed clipping bound. By default the bound is adaptive:
        ``10 * max(1, max |y| seen so far)``.
    nu_floor : float
        Lower bound applied to the variance estimates.
    bandwidth_override : float, optional
        Fixed Nadaraya-Watson bandwidth.
    k_override : int, optional
        Fixed number of neighbours (capped at the arm's sample count).
    """

    def __init__(
        self,
        dim: int,
        method: str = "nw",
        *,
        clip_c3: float | None = None,
        nu_floor: float = DEFAULT_NU_FLOOR,
        bandwidth_override: float | None = None,
        k_override: int | None = None,
        capacity: int = 64,
    ):
        if method not in METHODS:
            raise ConfigError(f"regressor must be one of {METHODS}, got {method!r}")
        if clip_c3 is not None and clip_c3 <= 0:
            raise ConfigError("clip_c3 must be positive")
        if nu_floor <= 0:
            raise ConfigError("nu_floor must be positive")
        if bandwidth_override is not None and bandwidth_override <= 0:
            raise ConfigError("bandwidth_override must be positive")
        if k_override is not None and k_override < 1:
            raise ConfigError("k_override must be >= 1")
        self.dim = int(dim)
        self.method = method
        self.clip_c3 = clip_c3
        self.nu_floor = nu_floor
        self.bandwidth_override = bandwidth_override
        self.k_override = k_override
        self._arms = (_ArmStore(self.dim, capacity), _ArmStore(self.dim, capacity))
        self._max_abs_y = 0.0

    # -- storage -----------------------------------------------------------

    def observe(self, x, a: int, y: float) -> None:
        """Append ``(x, y)`` to arm ``a``'s store."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ShapeError(f"expected covariate of shape ({self.dim},), got {x.shape}")
        if a not in (0, 1):
            raise ShapeError(f"action must be 0 or 1, got {a!r}")
        self._arms[a].append(x, float(y))
        self._max_abs_y = max(self._max_abs_y, abs(float(y)))

    def count(self, arm: int) -> int:
        return self._arms[arm].n

    @property
    def counts(self) -> tuple[int, int]:
        """``(N_0, N_1)``."""
        return self._arms[0].n, self._arms[1].n

    @property
    def n_obs(self) -> int:
        return self._arms[0].n + self._arms[1].n

    def samples(self, arm: int) -> tuple[np.ndarray, np.ndarray]:
        """Read-only views of arm ``arm``'s stored ``(X, y)``."""
        s = self._arms[arm]
        X, y = s.X[: s.n], s.y[: s.n]
        X.flags.writeable = False
        y.flags.writeable = False
        return X, y

    def copy(self) -> RegressorState:
        return copy.deepcopy(self)

    # -- tuning rules ------------------------------------------------------

    @property
    def clip_bound(self) -> float:
        if self.clip_c3 is not None:
            return self.clip_c3
        return 10.0 * max(1.0, self._max_abs_y)

    def n_neighbors(self, arm: int) -> int:
        n = self._arms[arm].n
        if self.k_override is not None:
            return min(self.k_override, n)
        return max(1, math.isqrt(n))

    def bandwidth(self, arm: int) -> float:
        if self.bandwidth_override is not None:
            return self.bandwidth_override
        s = self._arms[arm]
        return s.mean_sd() * s.n ** (-1.0 / (self.dim + 4))

    # -- prediction --------------------------------------------------------

    def _store(self, arm: int, x) -> tuple[_ArmStore, np.ndarray]:
        s = self._arms[arm]
        if s.n == 0:
            raise ColdArmError(arm)
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ShapeError(f"expected covariate of shape ({self.dim},), got {x.shape}")
        return s, x

    def _clip(self, first: float, second: float) -> tuple[float, float]:
        c = self.clip_bound
        return min(max(first, -c), c), min(max(second, 0.0), c * c)

    def _knn_raw(self, s: _ArmStore, x: np.ndarray, k: int) -> tuple[float, float]:
        diff = s.X[: s.n] - x
        # squares are accumulated coordinate by coordinate so that equal
        # distances compare equal and the arrival-order tie rule applies
        d2 = diff[:, 0] * diff[:, 0]
        for j in range(1, self.dim):
            d2 += diff[:, j] * diff[:, j]
        dist = np.sqrt(d2)
        idx = np.argsort(dist, kind="stable")[:k]
        y = s.y[idx]
        return math.fsum(y) / k, math.fsum(y * y) / k

    def _nw_raw(self, s: _ArmStore, x: np.ndarray, h: float) -> tuple[float, float]:
        y = s.y[: s.n]
        diff = s.X[: s.n] - x
        d2 = np.einsum("ij,ij->i", diff, diff)
        w = np.exp(d2 * (-0.5 / (h * h)))
        total = w.sum()
        if not total >= WEIGHT_FLOOR:
            return float(y.mean()), float(y @ y / s.n)
        wy = w * y
        return float(wy.sum() / total), float(wy @ y / total)

    def knn_moments(self, arm: int, x) -> tuple[float, float]:
        s, x = self._store(arm, x)
        return self._clip(*self._knn_raw(s, x, self.n_neighbors(arm)))

    def nw_moments(self, arm: int, x) -> tuple[float, float]:
        s, x = self._store(arm, x)
        return self._clip(*self._nw_raw(s, x, self.bandwidth(arm)))

    def moments(self, arm: int, x) -> tuple[float, float]:
        """Clipped ``(f_hat, e_hat)`` for ``arm`` at ``x`` with the configured method."""
        if self.method == "knn":
            return self.knn_moments(arm, x)
        return self.nw_moments(arm, x)

    def knn_predict(self, arm: int, x, moment: str = "first") -> float:
        """K-NN average of y (``moment="first"``) or y**2 (``"second"``)."""
        return self.knn_moments(arm, x)[_moment_index(moment)]

    def nw_predict(self, arm: int, x, moment: str = "first") -> float:
        """Nadaraya-Watson estimate; falls back to the arm mean when all weights vanish."""
        return self.nw_moments(arm, x)[_moment_index(moment)]

    def predict(self, arm: int, x, moment: str = "first") -> float:
        return self.moments(arm, x)[_moment_index(moment)]

    def predict_fv(self, x) -> FvSnapshot:
        """Means and floored variances for both arms at ``x``."""
        f1, e1 = self.moments(1, x)
        f0, e0 = self.moments(0, x)
        return FvSnapshot(
            f1, f0,
            floored_variance(e1, f1, self.nu_floor),
            floored_variance(e0, f0, self.nu_floor),
            self.n_obs,
        )


def _moment_index(moment: str) -> int:
    try:
        return MOMENTS.index(moment)
    except ValueError:
        raise ConfigError(f"moment must be 'first' or 'second', got {moment!r}") from None

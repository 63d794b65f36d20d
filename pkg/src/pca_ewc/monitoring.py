"""T2 / SPE statistics, KDE control limits and the alarm rule."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import (
    DegenerateSample,
    DimensionMismatch,
    InsufficientData,
    InvalidData,
    LengthMismatch,
    SingularScoreCovariance,
)
from .pca_core import as_data_matrix

DEFAULT_ALPHA = 0.99
KDE_GRID_POINTS = 2048
KDE_MIN_SAMPLES = 30
MAX_SCORE_COND = 1e12


@dataclass(frozen=True)
class ControlLimits:
    t2_limit: float
    spe_limit: float
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if not (self.t2_limit > 0 and self.spe_limit > 0):
            raise InvalidData(f"control limits must be > 0, got {self.t2_limit}, {self.spe_limit}")
        if not 0 < self.alpha < 1:
            raise InvalidData(f"alpha must lie in (0, 1), got {self.alpha}")
        object.__setattr__(self, "t2_limit", float(self.t2_limit))
        object.__setattr__(self, "spe_limit", float(self.spe_limit))
        object.__setattr__(self, "alpha", float(self.alpha))

    def to_dict(self):
        return {"t2_limit": self.t2_limit, "spe_limit": self.spe_limit, "alpha": self.alpha}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["t2_limit"]), float(d["spe_limit"]), float(d["alpha"]))


@dataclass(frozen=True)
class StatisticSeries:
    t2: np.ndarray
    spe: np.ndarray
    alarms: np.ndarray
    limits: ControlLimits

    def __len__(self):
        return self.t2.size

    @property
    def alarm_rate(self):
        return float(self.alarms.mean()) if self.alarms.size else 0.0

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sample_index", "t2", "spe", "t2_limit", "spe_limit", "alarm"])
            t2l, spel = repr(self.limits.t2_limit), repr(self.limits.spe_limit)
            for i, (a, b, al) in enumerate(zip(self.t2.tolist(), self.spe.tolist(), self.alarms.tolist())):
                w.writerow([i, repr(a), repr(b), t2l, spel, int(al)])


def score_covariance(P, Xs_train):
    """Inner T2 matrix P'X'XP / (N-1), rejected when badly conditioned."""
    Xs_train = as_data_matrix(Xs_train)
    P = np.asarray(P, dtype=float)
    if P.shape[0] != Xs_train.shape[1]:
        raise DimensionMismatch(f"loadings {P.shape} incompatible with data {Xs_train.shape}")
    T = Xs_train @ P
    S = T.T @ T / (Xs_train.shape[0] - 1)
    S = 0.5 * (S + S.T)
    if np.linalg.cond(S) > MAX_SCORE_COND:
        raise SingularScoreCovariance(f"score covariance condition number {np.linalg.cond(S):.3e}")
    return S


def t2_series(Xs, P, score_cov):
    """Hotelling T2 of every row of ``Xs``."""
    Xs = as_data_matrix(Xs, min_samples=1)
    P = np.asarray(P, dtype=float)
    if Xs.shape[1] != P.shape[0]:
        raise DimensionMismatch(f"data {Xs.shape} incompatible with loadings {P.shape}")
    T = Xs @ P
    # Cholesky solve keeps the quadratic form nonnegative
    L = np.linalg.cholesky(score_cov)
    Z = np.linalg.solve(L, T.T)
    return np.sum(Z * Z, axis=0)


def spe_series(Xs, P):
    """Squared residual norm ||x - PP'x||^2 of every row."""
    Xs = as_data_matrix(Xs, min_samples=1)
    P = np.asarray(P, dtype=float)
    if Xs.shape[1] != P.shape[0]:
        raise DimensionMismatch(f"data {Xs.shape} incompatible with loadings {P.shape}")
    E = Xs - (Xs @ P) @ P.T
    return np.sum(E * E, axis=1)


def t2_statistic(x, model, Xs_train):
    """T2 of one standardized sample against a model and its training block."""
    P = model.loadings if hasattr(model, "loadings") else np.asarray(model, dtype=float)
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return float(t2_series(x, P, score_covariance(P, Xs_train))[0])


def spe_statistic(x, P):
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return float(spe_series(x, P)[0])


def silverman_bandwidth(values):
    v = np.asarray(values, dtype=float)
    return 1.06 * v.std(ddof=1) * v.size ** (-0.2)


def kde_cdf(values, x, h):
    """Closed-form CDF at ``x`` of the Gaussian KDE with bandwidth ``h``."""
    return float(np.mean(ndtr((x - np.asarray(values, dtype=float)) / h)))


def kde_grid(values, alpha, h):
    v = np.asarray(values, dtype=float)
    # 3h covers alpha up to ~0.99; reach further for stricter levels
    upper = max(3.0, float(ndtri(alpha)) + 0.5)
    return np.linspace(v.min() - 3.0 * h, v.max() + upper * h, KDE_GRID_POINTS)


def kde_threshold(values, alpha=DEFAULT_ALPHA):
    """Smallest grid point at which the KDE CDF reaches ``alpha``.

    Gaussian kernel, Silverman bandwidth, 2048-point grid over
    [min - 3h, max + 3h].  The KDE CDF is monotone on the grid, so the
    first crossing is located by bisection.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size < KDE_MIN_SAMPLES:
        raise InsufficientData(f"need >= {KDE_MIN_SAMPLES} values, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise InvalidData("values contain non-finite entries")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    h = silverman_bandwidth(v)
    if not h > 0:
        raise DegenerateSample("sample standard deviation is zero")
    grid = kde_grid(v, alpha, h)
    lo, hi = 0, grid.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if kde_cdf(v, grid[mid], h) >= alpha:
            hi = mid
        else:
            lo = mid + 1
    return float(grid[lo])


def control_limits(t2_train, spe_train, alpha=DEFAULT_ALPHA):
    return ControlLimits(kde_threshold(t2_train, alpha), kde_threshold(spe_train, alpha), alpha)


def detect(t2, spe, limits):
    """Alarm wherever either statistic exceeds its limit."""
    t2 = np.asarray(t2, dtype=float).ravel()
    spe = np.asarray(spe, dtype=float).ravel()
    if t2.shape != spe.shape:
        raise LengthMismatch(f"T2 has {t2.size} samples, SPE has {spe.size}")
    if np.any(~np.isfinite(t2)) or np.any(~np.isfinite(spe)) or np.any(t2 < 0) or np.any(spe < 0):
        raise InvalidData("statistics must be finite and nonnegative")
    alarms = (t2 > limits.t2_limit) | (spe > limits.spe_limit)
    return StatisticSeries(t2, spe, alarms, limits)

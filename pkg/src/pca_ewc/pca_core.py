"""Standardization and baseline PCA (the "Model A" fit).

Everything here works on plain ``numpy`` arrays laid out one sample per
row.  Fitted objects are frozen dataclasses and are never mutated.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidData, RankDeficient, ZeroVarianceColumn

DEFAULT_CPV = 0.95
ORTHO_TOL = 1e-10


def as_data_matrix(X, name="X", min_samples=2):
    """Validate ``X`` as an N x m block of finite measurements.

    A 1-d input is treated as a single column.  Returns a float64 array
    (a copy is made only when the dtype or layout requires it).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise InvalidData(f"{name} must be 2-d, got shape {X.shape}")
    n, m = X.shape
    if n < min_samples or m < 1:
        raise InvalidData(f"{name} needs >= {min_samples} samples and >= 1 variable, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidData(f"{name} contains non-finite entries")
    return X


def _check_orthonormal(P, name="P", tol=ORTHO_TOL):
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[1] > P.shape[0]:
        raise DimensionMismatch(f"{name} must be m x l with l <= m, got {P.shape}")
    err = np.linalg.norm(P.T @ P - np.eye(P.shape[1]))
    if not err <= tol:
        raise InvalidData(f"{name} is not orthonormal (|P'P - I|_F = {err:.3e})")
    return P


@dataclass(frozen=True)
class Scaler:
    """Per-variable mean and sample standard deviation."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).ravel()
        std = np.asarray(self.std, dtype=float).ravel()
        if mean.shape != std.shape:
            raise DimensionMismatch("mean and std lengths differ")
        bad = np.flatnonzero(~(std > 0))
        if bad.size:
            raise ZeroVarianceColumn(int(bad[0]))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def n_vars(self):
        return self.mean.size

    def transform(self, X):
        return apply_scaler(self, X)

    def inverse_transform(self, Xs):
        Xs = np.asarray(Xs, dtype=float)
        return Xs * self.std + self.mean

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["mean"], dtype=float), np.array(d["std"], dtype=float))


@dataclass(frozen=True)
class PcaModel:
    """Orthonormal loadings plus the retained score variances.

    ``score_variances`` are the leading eigenvalues of the training
    covariance for a plain PCA fit.  For loadings that did not come from an
    eigendecomposition (PCA-EWC models) they are the eigenvalues of the
    score covariance ``P'X'XP / (N-1)``, sorted descending.
    """

    loadings: np.ndarray
    score_variances: np.ndarray
    n_train: int

    def __post_init__(self):
        P = _check_orthonormal(self.loadings, "loadings")
        sv = np.asarray(self.score_variances, dtype=float).ravel()
        if sv.size != P.shape[1]:
            raise DimensionMismatch("score_variances length must equal n_components")
        if np.any(sv <= 0) or np.any(np.diff(sv) > 0):
            raise InvalidData("score_variances must be strictly positive and non-increasing")
        object.__setattr__(self, "loadings", P)
        object.__setattr__(self, "score_variances", sv)
        object.__setattr__(self, "n_train", int(self.n_train))

    @property
    def n_vars(self):
        return self.loadings.shape[0]

    @property
    def n_components(self):
        return self.loadings.shape[1]

    def to_dict(self):
        return {
            "n_vars": self.n_vars,
            "n_components": self.n_components,
            "loadings": self.loadings.ravel().tolist(),
            "score_variances": self.score_variances.tolist(),
            "n_train": self.n_train,
        }

    @classmethod
    def from_dict(cls, d):
        m, l = int(d["n_vars"]), int(d["n_components"])
        P = np.array(d["loadings"], dtype=float).reshape(m, l)
        return cls(P, np.array(d["score_variances"], dtype=float), int(d["n_train"]))


def fit_scaler(X):
    """Column means and standard deviations (divisor N-1)."""
    X = as_data_matrix(X)
    mean = X.mean(axis=0)
    std = X.std(axis=0, ddof=1)
    zero = np.flatnonzero(std == 0)
    if zero.size:
        raise ZeroVarianceColumn(int(zero[0]))
    return Scaler(mean, std)


def apply_scaler(scaler, X):
    X = as_data_matrix(X, min_samples=1)
    if X.shape[1] != scaler.n_vars:
        raise DimensionMismatch(f"data has {X.shape[1]} variables, scaler has {scaler.n_vars}")
    return (X - scaler.mean) / scaler.std


def _fix_signs(V):
    # largest-magnitude entry of each column made positive
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def covariance(Xs):
    Xs = as_data_matrix(Xs)
    return Xs.T @ Xs / (Xs.shape[0] - 1)


def n_components_for_cpv(eigenvalues, cpv_threshold):
    """Smallest k whose leading eigenvalues reach the CPV threshold."""
    if not 0 < cpv_threshold <= 1:
        raise ValueError(f"cpv_threshold must lie in (0, 1], got {cpv_threshold}")
    lam = np.clip(np.asarray(eigenvalues, dtype=float), 0, None)
    frac = np.cumsum(lam) / lam.sum()
    hit = np.flatnonzero(frac >= cpv_threshold)
    # rounding can leave the full sum a hair under 1.0
    return int(hit[0]) + 1 if hit.size else lam.size


def fit_pca(Xs, cpv_threshold=DEFAULT_CPV, n_components=None):
    """Fit PCA on a standardized block.

    The number of components comes from the cumulative-percent-variance
    rule unless ``n_components`` pins it (used when later modes inherit the
    first mode's component count).
    """
    Xs = as_data_matrix(Xs)
    n = Xs.shape[0]
    evals, evecs = np.linalg.eigh(covariance(Xs))
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    if n_components is None:
        l = n_components_for_cpv(evals, cpv_threshold)
    else:
        l = int(n_components)
        if not 1 <= l <= Xs.shape[1]:
            raise ValueError(f"n_components must lie in [1, {Xs.shape[1]}], got {l}")
    scale = max(evals[0], 1.0)
    if np.count_nonzero(evals[:l] > 1e-14 * scale) < l:
        raise RankDeficient(f"fewer than {l} strictly positive eigenvalues")
    P = _fix_signs(evecs[:, :l])
    return PcaModel(P, evals[:l], n)


def pca_loss(P, Xs):
    """Residual energy tr(X'X) - tr(P'X'XP) of the projection onto span(P)."""
    Xs = as_data_matrix(Xs, min_samples=1)
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != Xs.shape[1]:
        raise DimensionMismatch(f"loadings {P.shape} incompatible with data {Xs.shape}")
    G = Xs.T @ Xs
    return max(float(np.trace(G) - np.trace(P.T @ G @ P)), 0.0)

"""Quadratic EWC penalty: Fisher surrogate, penalty matrix and its recursion."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatch, InvalidData, NonPositivePrior
from .pca_core import ORTHO_TOL, _check_orthonormal, as_data_matrix

DEFAULT_LAMBDA_PRIOR = 1e-3


def _check_square(M, name):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {M.shape}")
    return M


@dataclass(frozen=True)
class EwcState:
    """Accumulated penalty ``omega`` anchored at the last optimal loadings.

    ``lambda_mode`` is the weight used for the most recently absorbed mode.
    """

    omega: np.ndarray
    anchor: np.ndarray
    lambda_mode: float
    lambda_prior: float
    mode_count: int = 1

    def __post_init__(self):
        omega = _check_square(self.omega, "omega")
        anchor = _check_orthonormal(self.anchor, "anchor", ORTHO_TOL)
        if anchor.shape[0] != omega.shape[0]:
            raise DimensionMismatch(f"anchor {anchor.shape} does not match omega {omega.shape}")
        if not np.allclose(omega, omega.T, rtol=0, atol=1e-10 * max(1.0, np.abs(omega).max())):
            raise InvalidData("omega is not symmetric")
        if not self.lambda_prior > 0:
            raise NonPositivePrior(f"lambda_prior must be > 0, got {self.lambda_prior}")
        if not self.lambda_mode >= 0:
            raise InvalidData(f"lambda_mode must be >= 0, got {self.lambda_mode}")
        if np.linalg.eigvalsh(omega)[0] <= 0:
            raise InvalidData("omega is not positive definite")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "lambda_mode", float(self.lambda_mode))
        object.__setattr__(self, "lambda_prior", float(self.lambda_prior))
        object.__setattr__(self, "mode_count", int(self.mode_count))

    def to_dict(self):
        m, l = self.anchor.shape
        return {
            "omega": self.omega.ravel().tolist(),
            "anchor": self.anchor.ravel().tolist(),
            "anchor_shape": [m, l],
            "lambda_mode": self.lambda_mode,
            "lambda_prior": self.lambda_prior,
            "mode_count": self.mode_count,
        }

    @classmethod
    def from_dict(cls, d):
        m, l = (int(v) for v in d["anchor_shape"])
        return cls(
            omega=np.array(d["omega"], dtype=float).reshape(m, m),
            anchor=np.array(d["anchor"], dtype=float).reshape(m, l),
            lambda_mode=float(d["lambda_mode"]),
            lambda_prior=float(d["lambda_prior"]),
            mode_count=int(d["mode_count"]),
        )


def fisher_matrix(Xs):
    """Empirical second moment X'X / N of a standardized block.

    This is the curvature of the quadratic PCA loss per sample and serves as
    the Fisher information surrogate; it is symmetric PSD by construction.
    """
    Xs = as_data_matrix(Xs)
    F = Xs.T @ Xs / Xs.shape[0]
    return 0.5 * (F + F.T)


def default_lambda(F):
    """m / tr(F): scales the penalty to the data energy."""
    F = _check_square(F, "F")
    tr = float(np.trace(F))
    return F.shape[0] / tr if tr > 0 else 1.0


def make_omega(F, lambda_mode, lambda_prior=DEFAULT_LAMBDA_PRIOR):
    """Omega = (lambda * F + lambda_prior * I) / 2."""
    F = _check_square(F, "F")
    if not lambda_prior > 0:
        raise NonPositivePrior(f"lambda_prior must be > 0, got {lambda_prior}")
    if lambda_mode < 0:
        raise InvalidData(f"lambda_mode must be >= 0, got {lambda_mode}")
    return 0.5 * (lambda_mode * F + lambda_prior * np.eye(F.shape[0]))


def initial_state(F, anchor, lambda_mode=None, lambda_prior=DEFAULT_LAMBDA_PRIOR):
    """EWC state after the first mode has been learned."""
    if lambda_mode is None:
        lambda_mode = default_lambda(F)
    omega = make_omega(F, lambda_mode, lambda_prior)
    return EwcState(omega, anchor, lambda_mode, lambda_prior, 1)


def update_omega(state, F_new, lambda_new, anchor=None):
    """Absorb one more mode: Omega += lambda_new * F_new / 2.

    ``anchor`` should be the optimal loadings of the mode just absorbed;
    when omitted the previous anchor is kept.
    """
    F_new = _check_square(F_new, "F_new")
    if F_new.shape != state.omega.shape:
        raise DimensionMismatch(f"F_new {F_new.shape} does not match omega {state.omega.shape}")
    if lambda_new < 0:
        raise InvalidData(f"lambda_new must be >= 0, got {lambda_new}")
    omega = state.omega + 0.5 * lambda_new * F_new
    omega = 0.5 * (omega + omega.T)
    return replace(
        state,
        omega=omega,
        anchor=state.anchor if anchor is None else anchor,
        lambda_mode=lambda_new,
        mode_count=state.mode_count + 1,
    )


def ewc_loss(P, state):
    """tr((P - P_prev)' Omega (P - P_prev))."""
    P = np.asarray(P, dtype=float)
    if P.shape != state.anchor.shape:
        raise DimensionMismatch(f"P {P.shape} does not match anchor {state.anchor.shape}")
    D = P - state.anchor
    return max(float(np.sum(D * (state.omega @ D))), 0.0)

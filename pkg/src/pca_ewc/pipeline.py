"""Mode lifecycle: initial PCA model, PCA-EWC updates, monitoring, model files."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dc_solver import DcConfig, solve
from .errors import DimensionMismatch, InsufficientData, ModeOrderError, ModelFileCorrupt, PcaEwcError
from .ewc import DEFAULT_LAMBDA_PRIOR, EwcState, fisher_matrix, initial_state, update_omega
from .monitoring import (
    DEFAULT_ALPHA,
    ControlLimits,
    control_limits,
    detect,
    score_covariance,
    spe_series,
    t2_series,
)
from .pca_core import DEFAULT_CPV, PcaModel, Scaler, apply_scaler, as_data_matrix, fit_pca, fit_scaler

MODEL_FORMAT = "pca-ewc-model"
MODEL_VERSION = 1
DEFAULT_MEAN_TOL = 0.5
DEFAULT_STD_TOL = math.log(1.5)
NEW_MODE_SCALER_SAMPLES = 200

_LABELS = {1: "Model A", 2: "Model B"}


def default_label(mode_index):
    return _LABELS.get(mode_index, f"PCA-EWC mode {mode_index}")


@dataclass(frozen=True)
class ModeModelState:
    pca: PcaModel
    ewc: EwcState
    limits: ControlLimits
    scaler: Scaler
    score_cov: np.ndarray
    mode_index: int = 1
    label: str = "Model A"
    solver: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.pca.loadings.shape != self.ewc.anchor.shape:
            raise DimensionMismatch("PCA loadings and EWC anchor differ in shape")
        if self.scaler.n_vars != self.pca.n_vars:
            raise DimensionMismatch("scaler and loadings disagree on the number of variables")
        if int(self.mode_index) < 1:
            raise ValueError(f"mode_index must be >= 1, got {self.mode_index}")
        S = np.asarray(self.score_cov, dtype=float)
        if S.shape != (self.pca.n_components,) * 2:
            raise DimensionMismatch(f"score_cov shape {S.shape} does not match {self.pca.n_components} components")
        object.__setattr__(self, "score_cov", S)

    @property
    def loadings(self):
        return self.pca.loadings

    @property
    def n_components(self):
        return self.pca.n_components

    def to_dict(self):
        model = self.pca.to_dict()
        model["scaler"] = self.scaler.to_dict()
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "label": self.label,
            "mode_index": self.mode_index,
            "model": model,
            "score_cov": self.score_cov.ravel().tolist(),
            "limits": self.limits.to_dict(),
            "ewc": self.ewc.to_dict(),
            "solver": dict(self.solver),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != MODEL_FORMAT:
            raise ModelFileCorrupt(f"not a {MODEL_FORMAT} document")
        pca = PcaModel.from_dict(d["model"])
        l = pca.n_components
        return cls(
            pca=pca,
            ewc=EwcState.from_dict(d["ewc"]),
            limits=ControlLimits.from_dict(d["limits"]),
            scaler=Scaler.from_dict(d["model"]["scaler"]),
            score_cov=np.array(d["score_cov"], dtype=float).reshape(l, l),
            mode_index=int(d["mode_index"]),
            label=str(d["label"]),
            solver=dict(d.get("solver", {})),
        )


def dumps_model(state):
    return json.dumps(state.to_dict(), indent=2, sort_keys=True) + "\n"


def loads_model(text):
    try:
        return ModeModelState.from_dict(json.loads(text))
    except ModelFileCorrupt:
        raise
    except (ValueError, KeyError, TypeError, PcaEwcError) as exc:
        raise ModelFileCorrupt(f"cannot read model: {exc}") from exc


def save_model(state, path):
    with open(path, "w") as fh:
        fh.write(dumps_model(state))


def load_model(path):
    with open(path) as fh:
        return loads_model(fh.read())


def _build_limits(P, Xs, alpha):
    S = score_covariance(P, Xs)
    lim = control_limits(t2_series(Xs, P, S), spe_series(Xs, P), alpha)
    return S, lim


def train_initial(
    X1,
    cpv=DEFAULT_CPV,
    lambda_mode=None,
    lambda_prior=DEFAULT_LAMBDA_PRIOR,
    alpha=DEFAULT_ALPHA,
    n_components=None,
    label="Model A",
):
    """Plain PCA model of the first mode plus its EWC state.

    ``lambda_mode=None`` uses m / tr(F).  The same call with the second
    mode's data and ``label="Model C"`` gives the forgetful baseline.
    """
    scaler = fit_scaler(X1)
    Xs = apply_scaler(scaler, X1)
    pca = fit_pca(Xs, cpv, n_components)
    ewc = initial_state(fisher_matrix(Xs), pca.loadings, lambda_mode, lambda_prior)
    S, lim = _build_limits(pca.loadings, Xs, alpha)
    return ModeModelState(pca, ewc, lim, scaler, S, 1, label)


def continual_update(state, X_new, lambda_new=None, cfg=None, new_mode_index=None, label=None, alpha=None):
    """Learn the next mode with PCA-EWC, keeping the component count.

    ``lambda_new`` weights the new mode's Fisher matrix when it is folded
    into the penalty for later modes (default: the state's current weight).
    """
    target = state.mode_index + 1 if new_mode_index is None else int(new_mode_index)
    if target <= state.mode_index:
        raise ModeOrderError(f"mode {target} cannot follow mode {state.mode_index}; modes are learned in order")
    scaler = fit_scaler(X_new)
    if scaler.n_vars != state.pca.n_vars:
        raise DimensionMismatch(f"new data has {scaler.n_vars} variables, model has {state.pca.n_vars}")
    Xs = apply_scaler(scaler, X_new)
    sol = solve(state.ewc, Xs, cfg or DcConfig())
    P = sol.loadings
    if lambda_new is None:
        lambda_new = state.ewc.lambda_mode
    ewc = update_omega(state.ewc, fisher_matrix(Xs), lambda_new, anchor=P)
    alpha = state.limits.alpha if alpha is None else alpha
    S, lim = _build_limits(P, Xs, alpha)
    variances = np.sort(np.linalg.eigvalsh(S))[::-1]
    pca = PcaModel(P, variances, Xs.shape[0])
    return ModeModelState(
        pca,
        ewc,
        lim,
        scaler,
        S,
        target,
        label or default_label(target),
        {"iterations": sol.iterations, "converged": sol.converged},
    )


def monitor_block(state, X_test, scaler_override=None):
    """T2/SPE series and alarms for a test block.

    ``scaler_override`` standardizes a block from a mode the model was not
    trained on with that mode's own statistics.
    """
    scaler = scaler_override or state.scaler
    Xs = apply_scaler(scaler, X_test)
    P = state.loadings
    return detect(t2_series(Xs, P, state.score_cov), spe_series(Xs, P), state.limits)


def relabel(state, label):
    return replace(state, label=label)


@dataclass(frozen=True)
class ModeChangeReport:
    changed: bool
    mean_shift: np.ndarray
    std_ratio: np.ndarray


def detect_mode_change(reference, window, mean_tol=DEFAULT_MEAN_TOL, std_tol=DEFAULT_STD_TOL):
    """Compare a window's mean and spread with a reference scaler.

    Shifts are in reference standard deviations; the mode is flagged as
    changed when any mean moves by more than ``mean_tol`` or any spread
    ratio leaves ``exp(+-std_tol)``.
    """
    W = as_data_matrix(window, "window", min_samples=1)
    if W.shape[0] < 30:
        raise InsufficientData(f"mode-change window needs >= 30 samples, got {W.shape[0]}")
    Z = apply_scaler(reference, W)
    mean_shift = Z.mean(axis=0)
    std_ratio = Z.std(axis=0, ddof=1)
    with np.errstate(divide="ignore"):
        log_ratio = np.abs(np.log(std_ratio))
    changed = bool(np.max(np.abs(mean_shift)) > mean_tol or np.max(log_ratio) > std_tol)
    return ModeChangeReport(changed, mean_shift, std_ratio)


def new_mode_scaler(stream, change_index, n_samples=NEW_MODE_SCALER_SAMPLES):
    """Scaler from the first ``n_samples`` rows after a detected change."""
    stream = as_data_matrix(stream, "stream", min_samples=1)
    block = stream[int(change_index): int(change_index) + int(n_samples)]
    if block.shape[0] < 2:
        raise InsufficientData("not enough samples after the change point")
    return fit_scaler(block)

"""Continual PCA monitoring with an elastic weight consolidation penalty."""

__version__ = "0.1.0"

from .dc_solver import DcConfig, DcSolution, polar_factor, solve
from .errors import *  # noqa: F401,F403
from .ewc import EwcState, ewc_loss, fisher_matrix, initial_state, update_omega
from .evalkit import ExperimentConfig, compute_metrics, emit_report, numerical_case_config, run_experiments
from .monitoring import ControlLimits, control_limits, detect, kde_threshold
from .pca_core import PcaModel, Scaler, fit_pca, fit_scaler
from .pipeline import ModeModelState, continual_update, load_model, monitor_block, save_model, train_initial
from .simgen import FAULTS, SITUATIONS, generate_block, inject_fault

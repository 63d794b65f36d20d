"""Run configuration loaded from TOML.

Layout (every table and key is optional)::

    seed = 0
    n_runs = 100
    output_dir = "out"
    scenarios = [1, 2, 3, 4, 5]
    faults = [1, 2, 3]
    workers = 1

    [model]
    cpv_threshold = 0.95
    n_components = 3          # pin l instead of using the CPV rule
    lambda_mode = 1e12        # omit for m / tr(F)
    lambda_prior = 1e-3
    alpha = 0.99

    [solver]
    epsilon = 1e-10
    max_iters = 500
    shift = true
    refine = true

    [simulation]
    block_size = 1000
    scaler_samples = 1000
    noise_std = 0.001
    fault = 1                 # fault written by `simulate`

    [train]
    data = ["train1.csv", "train2.csv"]   # or data_ids = [1, 2]
    plain = false
    model_out = "model.json"
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .dc_solver import DcConfig
from .errors import ConfigError
from .evalkit import ExperimentConfig
from .simgen import BLOCK_SIZE, FAULTS, NOISE_STD, SITUATIONS


@dataclass(frozen=True)
class RunConfig:
    scenarios: tuple = (1, 2, 3, 4, 5)
    faults: tuple = (1, 2, 3)
    seed: int = 0
    n_runs: int = 100
    output_dir: str = "out"
    workers: int = 1
    cpv_threshold: float = 0.95
    n_components: int | None = None
    lambda_mode: float | None = None
    lambda_prior: float = 1e-3
    alpha: float = 0.99
    epsilon: float = 1e-10
    max_iters: int = 500
    shift: bool = True
    refine: bool = True
    block_size: int = BLOCK_SIZE
    scaler_samples: int = BLOCK_SIZE
    noise_std: float = NOISE_STD
    sim_fault: int = 1
    train_data: tuple = ()
    train_data_ids: tuple = ()
    plain: bool = False
    model_out: str | None = None

    def dc_config(self, record_trace=False):
        return DcConfig(self.epsilon, self.max_iters, record_trace, self.shift, self.refine)

    def experiment_config(self):
        return ExperimentConfig(
            situations=tuple(self.scenarios),
            faults={f: FAULTS[f] for f in self.faults},
            cpv=self.cpv_threshold,
            n_components=self.n_components,
            lambda_mode=self.lambda_mode,
            lambda_prior=self.lambda_prior,
            alpha=self.alpha,
            dc=self.dc_config(),
            block_size=self.block_size,
            scaler_samples=self.scaler_samples,
            noise_std=self.noise_std,
        )

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return validate(dataclasses.replace(self, **kw))


# (toml table, toml key) -> RunConfig field
_KEYS = {
    (None, "scenarios"): "scenarios",
    (None, "faults"): "faults",
    (None, "seed"): "seed",
    (None, "n_runs"): "n_runs",
    (None, "output_dir"): "output_dir",
    (None, "workers"): "workers",
    ("model", "cpv_threshold"): "cpv_threshold",
    ("model", "n_components"): "n_components",
    ("model", "lambda_mode"): "lambda_mode",
    ("model", "lambda_prior"): "lambda_prior",
    ("model", "alpha"): "alpha",
    ("solver", "epsilon"): "epsilon",
    ("solver", "max_iters"): "max_iters",
    ("solver", "shift"): "shift",
    ("solver", "refine"): "refine",
    ("simulation", "block_size"): "block_size",
    ("simulation", "scaler_samples"): "scaler_samples",
    ("simulation", "noise_std"): "noise_std",
    ("simulation", "fault"): "sim_fault",
    ("train", "data"): "train_data",
    ("train", "data_ids"): "train_data_ids",
    ("train", "plain"): "plain",
    ("train", "model_out"): "model_out",
}
_TABLES = {t for t, _ in _KEYS if t is not None}


def _name(table, key):
    return key if table is None else f"{table}.{key}"


def from_mapping(doc):
    values = {}
    for key, value in doc.items():
        if isinstance(value, dict):
            if key not in _TABLES:
                raise ConfigError(f"unknown table [{key}]")
            for sub, v in value.items():
                if (key, sub) not in _KEYS:
                    raise ConfigError(f"unknown key {key}.{sub} = {v!r}")
                values[_KEYS[(key, sub)]] = (v, _name(key, sub))
        else:
            if (None, key) not in _KEYS:
                raise ConfigError(f"unknown key {key} = {value!r}")
            values[_KEYS[(None, key)]] = (value, key)
    kwargs = {}
    for fname, (v, _) in values.items():
        if isinstance(v, list):
            v = tuple(v)
        kwargs[fname] = v
    try:
        cfg = RunConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return validate(cfg)


def load_config(path):
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return from_mapping(doc)


def _require(ok, key, value, what):
    if not ok:
        raise ConfigError(f"{key} = {value!r}: {what}")


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def validate(cfg):
    c = cfg
    _require(len(c.scenarios) > 0 and all(_is_int(s) and s in SITUATIONS for s in c.scenarios),
             "scenarios", list(c.scenarios), f"each entry must be one of {sorted(SITUATIONS)}")
    _require(len(c.faults) > 0 and all(_is_int(f) and f in FAULTS for f in c.faults),
             "faults", list(c.faults), f"each entry must be one of {sorted(FAULTS)}")
    _require(_is_int(c.seed) and c.seed >= 0, "seed", c.seed, "must be a nonnegative integer")
    _require(_is_int(c.n_runs) and c.n_runs >= 1, "n_runs", c.n_runs, "must be an integer >= 1")
    _require(_is_int(c.workers) and c.workers >= 1, "workers", c.workers, "must be an integer >= 1")
    _require(isinstance(c.output_dir, str) and c.output_dir, "output_dir", c.output_dir, "must be a path")
    _require(_is_num(c.cpv_threshold) and 0 < c.cpv_threshold <= 1,
             "model.cpv_threshold", c.cpv_threshold, "must lie in (0, 1]")
    _require(c.n_components is None or (_is_int(c.n_components) and c.n_components >= 1),
             "model.n_components", c.n_components, "must be an integer >= 1")
    _require(c.lambda_mode is None or (_is_num(c.lambda_mode) and c.lambda_mode >= 0),
             "model.lambda_mode", c.lambda_mode, "must be >= 0")
    _require(_is_num(c.lambda_prior) and c.lambda_prior > 0, "model.lambda_prior", c.lambda_prior, "must be > 0")
    _require(_is_num(c.alpha) and 0 < c.alpha < 1, "model.alpha", c.alpha, "must lie in (0, 1)")
    _require(_is_num(c.epsilon) and c.epsilon > 0, "solver.epsilon", c.epsilon, "must be > 0")
    _require(_is_int(c.max_iters) and c.max_iters >= 1, "solver.max_iters", c.max_iters, "must be an integer >= 1")
    _require(isinstance(c.shift, bool), "solver.shift", c.shift, "must be true or false")
    _require(isinstance(c.refine, bool), "solver.refine", c.refine, "must be true or false")
    _require(_is_int(c.block_size) and c.block_size >= 30,
             "simulation.block_size", c.block_size, "must be an integer >= 30")
    _require(_is_int(c.scaler_samples) and c.scaler_samples >= 2,
             "simulation.scaler_samples", c.scaler_samples, "must be an integer >= 2")
    _require(_is_num(c.noise_std) and c.noise_std >= 0, "simulation.noise_std", c.noise_std, "must be >= 0")
    _require(_is_int(c.sim_fault) and c.sim_fault in FAULTS,
             "simulation.fault", c.sim_fault, f"must be one of {sorted(FAULTS)}")
    _require(all(isinstance(p, str) for p in c.train_data), "train.data", list(c.train_data), "must be a list of paths")
    _require(all(_is_int(d) and 1 <= d <= 4 for d in c.train_data_ids),
             "train.data_ids", list(c.train_data_ids), "entries must be data ids 1..4")
    _require(not (c.train_data and c.train_data_ids), "train.data_ids", list(c.train_data_ids),
             "give either train.data or train.data_ids, not both")
    _require(isinstance(c.plain, bool), "train.plain", c.plain, "must be true or false")
    n_train = len(c.train_data) or len(c.train_data_ids)
    _require(not c.plain or n_train <= 1, "train.plain", c.plain, "plain PCA trains on a single block")
    return c

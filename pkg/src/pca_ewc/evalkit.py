"""Detection metrics, repeated randomized experiments and report files."""
from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dc_solver import DcConfig
from .errors import OnsetOutOfRange, RunFailure
from .ewc import DEFAULT_LAMBDA_PRIOR
from .monitoring import DEFAULT_ALPHA
from .pca_core import DEFAULT_CPV, fit_scaler
from .pipeline import continual_update, monitor_block, train_initial
from .simgen import (
    BLOCK_SIZE,
    FAULTS,
    NOISE_STD,
    ROLE_NORMAL,
    ROLE_TEST,
    ROLE_TRAIN,
    generate_block,
    get_situation,
    inject_fault,
)


@dataclass(frozen=True)
class DetectionMetrics:
    """FDR and FAR in percent; ``dd`` is None when the fault was never flagged."""

    fdr: float
    far: float
    dd: int | None

    @property
    def detected(self):
        return self.dd is not None


def compute_metrics(alarms, onset):
    """Per-sample FDR / FAR and the detection delay for a fault starting at row ``onset``."""
    alarms = np.asarray(alarms, dtype=bool).ravel()
    n = alarms.size
    if not 0 <= onset < n:
        raise OnsetOutOfRange(f"onset {onset} outside 0..{n - 1}")
    after, before = alarms[onset:], alarms[:onset]
    fdr = 100.0 * np.count_nonzero(after) / after.size
    far = 100.0 * np.count_nonzero(before) / before.size if before.size else 0.0
    hits = np.flatnonzero(after)
    dd = int(hits[0]) if hits.size else None
    return DetectionMetrics(float(fdr), float(far), dd)


@dataclass(frozen=True)
class ExperimentConfig:
    """Which situations and faults to run and with what model settings.

    ``lambda_mode=None`` uses the m / tr(F) default.  ``n_components=None``
    picks the count by CPV on the first mode; later models inherit it.
    """

    situations: tuple = (1, 2, 3, 4, 5)
    faults: dict = field(default_factory=lambda: dict(FAULTS))
    cpv: float = DEFAULT_CPV
    n_components: int | None = None
    lambda_mode: float | None = None
    lambda_prior: float = DEFAULT_LAMBDA_PRIOR
    alpha: float = DEFAULT_ALPHA
    dc: DcConfig = field(default_factory=DcConfig)
    block_size: int = BLOCK_SIZE
    scaler_samples: int = BLOCK_SIZE
    noise_std: float = NOISE_STD


# Settings under which the eight-variable simulation is reproduced.  The
# mixing model has rank 3, but one standardized component carries ~97% of
# the variance, so a 0.95 CPV keeps a single component and the residual
# space is swamped by signal.  0.999 recovers all three.  Mode 1's residual
# subspace is pure measurement noise, where lambda * F is only ~1e-6 * lambda;
# it has to outweigh X'X (~1e3) for Model B to keep mode 1's subspace.
NUMERICAL_CASE = {"cpv": 0.999, "lambda_mode": 1e12}


def numerical_case_config(**overrides):
    return ExperimentConfig(**{**NUMERICAL_CASE, **overrides})


@dataclass(frozen=True)
class RunRecord:
    run: int
    seed: int
    situation: int
    fault: int
    metrics: DetectionMetrics


@dataclass(frozen=True)
class CellSummary:
    fdr_mean: float
    fdr_std: float
    far_mean: float
    far_std: float
    dd_mean: float | None
    dd_std: float | None
    n_detected: int
    n_undetected: int


@dataclass
class ExperimentSummary:
    n_runs: int
    cells: dict = field(default_factory=dict)
    records: list = field(default_factory=list)
    situations: tuple = ()
    faults: tuple = ()
    example_series: dict = field(default_factory=dict)

    def cell(self, situation, fault):
        return self.cells[(situation, fault)]


def _run_once(cfg, run, seed, keep_series=False):
    """One replicate of the simulation scheme; returns records and optional series."""
    sits = [get_situation(s) for s in cfg.situations]
    models_needed = {s.model for s in sits}
    n = cfg.block_size
    X1 = generate_block(1, n, seed, ROLE_TRAIN, cfg.noise_std)
    model_a = train_initial(
        X1, cfg.cpv, cfg.lambda_mode, cfg.lambda_prior, cfg.alpha, cfg.n_components, "Model A"
    )
    models = {"A": model_a}
    if models_needed & {"B", "C"}:
        X2 = generate_block(2, n, seed, ROLE_TRAIN, cfg.noise_std)
        if "B" in models_needed:
            models["B"] = continual_update(model_a, X2, cfg=cfg.dc, alpha=cfg.alpha)
        if "C" in models_needed:
            models["C"] = train_initial(
                X2, cfg.cpv, cfg.lambda_mode, cfg.lambda_prior, cfg.alpha, model_a.n_components, "Model C"
            )
    clean, scalers = {}, {}
    records, series = [], {}
    for sit in sits:
        d = sit.test_data
        if d not in clean:
            clean[d] = generate_block(d, n, seed, ROLE_TEST, cfg.noise_std)
        override = None
        if sit.scaler_from == "normal":
            if d not in scalers:
                scalers[d] = fit_scaler(generate_block(d, cfg.scaler_samples, seed, ROLE_NORMAL, cfg.noise_std))
            override = scalers[d]
        for fid in sorted(cfg.faults):
            fault = cfg.faults[fid]
            X, _ = inject_fault(clean[d], fault)
            s = monitor_block(models[sit.model], X, override)
            m = compute_metrics(s.alarms, fault.onset_row)
            records.append(RunRecord(run, seed, sit.situation_id, fid, m))
            if keep_series:
                series[(sit.situation_id, fid)] = s
    return records, series


def _run_job(args):
    cfg, run, seed = args
    try:
        return _run_once(cfg, run, seed, keep_series=(run == 0))
    except Exception as exc:
        raise RunFailure(seed, exc) from exc


def _summarize(records):
    cells = {}
    keys = sorted({(r.situation, r.fault) for r in records})
    for key in keys:
        ms = [r.metrics for r in records if (r.situation, r.fault) == key]
        fdr = np.array([m.fdr for m in ms])
        far = np.array([m.far for m in ms])
        dd = np.array([m.dd for m in ms if m.detected], dtype=float)
        cells[key] = CellSummary(
            float(fdr.mean()),
            float(fdr.std()),
            float(far.mean()),
            float(far.std()),
            float(dd.mean()) if dd.size else None,
            float(dd.std()) if dd.size else None,
            int(dd.size),
            len(ms) - int(dd.size),
        )
    return cells


def run_experiments(cfg=None, n_runs=100, base_seed=0, workers=1):
    """Repeat the simulation scheme ``n_runs`` times with seeds base_seed + r.

    Runs are independent; with ``workers > 1`` they execute in a process
    pool and are aggregated in run order, so the summary does not depend
    on the worker count.  DD statistics exclude runs where the fault was
    never flagged (counted in ``n_undetected``).
    """
    cfg = cfg or ExperimentConfig()
    if n_runs < 1:
        raise ValueError(f"n_runs must be >= 1, got {n_runs}")
    jobs = [(cfg, r, base_seed + r) for r in range(n_runs)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(j) for j in jobs]
    records = [rec for recs, _ in results for rec in recs]
    return ExperimentSummary(
        n_runs=n_runs,
        cells=_summarize(records),
        records=records,
        situations=tuple(cfg.situations),
        faults=tuple(sorted(cfg.faults)),
        example_series=results[0][1],
    )


def _fmt(x):
    return "" if x is None else f"{x:.6f}"


def write_summary_csv(summary, path):
    """Table-style summary: one mean row and one std row per situation."""
    faults = summary.faults
    header = ["situation", "statistic"]
    for f in faults:
        header += [f"fault{f}_fdr", f"fault{f}_far", f"fault{f}_dd"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for s in summary.situations:
            if not any((s, f) in summary.cells for f in faults):
                continue
            mean_row, std_row = [s, "mean"], [s, "std"]
            for f in faults:
                c = summary.cells.get((s, f))
                if c is None:
                    mean_row += ["", "", ""]
                    std_row += ["", "", ""]
                    continue
                mean_row += [_fmt(c.fdr_mean), _fmt(c.far_mean), _fmt(c.dd_mean)]
                std_row += [_fmt(c.fdr_std), _fmt(c.far_std), _fmt(c.dd_std)]
            w.writerow(mean_row)
            w.writerow(std_row)


def write_metrics_csv(summary, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "seed", "situation", "fault", "fdr", "far", "dd"])
        for r in summary.records:
            m = r.metrics
            w.writerow([r.run, r.seed, r.situation, r.fault, repr(m.fdr), repr(m.far), "" if m.dd is None else m.dd])


def plot_series_svg(series, path, title=""):
    """Two stacked panels (T2, SPE) with the control limits as horizontal lines."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "pca-ewc"
    fig, axes = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    idx = np.arange(1, len(series) + 1)
    panels = (
        ("T2", series.t2, series.limits.t2_limit, "t2"),
        ("SPE", series.spe, series.limits.spe_limit, "spe"),
    )
    for ax, (name, values, limit, tag) in zip(axes, panels):
        ax.plot(idx, values, lw=0.8, color="tab:blue", gid=f"series-{tag}")
        ax.axhline(limit, color="tab:red", ls="--", lw=1.0, gid=f"limit-{tag}")
        ax.set_ylabel(name)
        if np.all(values > 0):
            ax.set_yscale("log")
    axes[-1].set_xlabel("sample")
    if title:
        axes[0].set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_report(summary, out_dir, charts=True):
    """Write summary.csv, metrics.csv and one SVG chart per situation/fault pair."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    p = os.path.join(out_dir, "summary.csv")
    write_summary_csv(summary, p)
    written.append(p)
    p = os.path.join(out_dir, "metrics.csv")
    write_metrics_csv(summary, p)
    written.append(p)
    if charts:
        for (s, f), series in sorted(summary.example_series.items()):
            p = os.path.join(out_dir, f"situation{s}_fault{f}.svg")
            plot_series_svg(series, p, f"Situation {s}, Fault {f}")
            written.append(p)
    return written


@dataclass(frozen=True)
class GateCriterion:
    name: str
    situations: tuple
    faults: tuple
    metric: str
    low: float | None = None
    high: float | None = None

    def check(self, summary):
        """Return (passed, detail) over every listed cell."""
        parts, ok = [], True
        for s in self.situations:
            for f in self.faults:
                c = summary.cells.get((s, f))
                value = None if c is None else getattr(c, f"{self.metric}_mean")
                good = value is not None
                if good and self.low is not None:
                    good = value >= self.low
                if good and self.high is not None:
                    good = value <= self.high
                ok &= good
                shown = "n/a" if value is None else f"{value:.3f}"
                parts.append(f"S{s}F{f}={shown}")
        return ok, " ".join(parts)


TABLE_GATES = (
    GateCriterion("S1 FDR", (1,), (1, 2), "fdr", low=99.5),
    GateCriterion("S1 FAR", (1,), (1, 2), "far", high=1.0),
    GateCriterion("S1 DD", (1,), (1, 2), "dd", high=1.0),
    GateCriterion("S2 FDR", (2,), (1, 2), "fdr", low=99.5),
    GateCriterion("S2 FAR", (2,), (1, 2), "far", high=1.0),
    GateCriterion("S2 DD", (2,), (1, 2), "dd", high=1.0),
    GateCriterion("S3 FDR", (3,), (1, 2), "fdr", low=99.5),
    GateCriterion("S3 FAR", (3,), (1, 2, 3), "far", high=10.0),
    GateCriterion("S4 FAR", (4,), (1, 2, 3), "far", low=20.0),
    GateCriterion("S5 FDR", (5,), (1, 2), "fdr", low=99.5),
    GateCriterion("S5 FAR", (5,), (1, 2, 3), "far", high=10.0),
    GateCriterion("Fault 3 DD, S1-2", (1, 2), (3,), "dd", low=2.0, high=12.0),
    GateCriterion("Fault 3 DD, S3-5", (3, 4, 5), (3,), "dd", low=8.0, high=30.0),
)


def gate(summary, criteria=TABLE_GATES):
    """Evaluate gate criteria; returns a list of (name, passed, detail)."""
    return [(c.name, *c.check(summary)) for c in criteria]

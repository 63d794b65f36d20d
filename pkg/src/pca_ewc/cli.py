"""Command-line entry point: ``pca-ewc simulate | train | monitor | evaluate``.

Parameters come from a TOML file (``--config``) with flag overrides.
Exit codes: 0 success, 1 gate failure, 2 usage or configuration error,
3 runtime error.  Set ``PCA_EWC_LOG_LEVEL`` (e.g. DEBUG) for more output.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np
import tomli_w

from . import __version__
from .config import RunConfig, load_config
from .errors import ConfigError, IoFailure, PcaEwcError
from .evalkit import compute_metrics, emit_report, gate, run_experiments
from .pca_core import fit_scaler
from .pipeline import continual_update, default_label, load_model, monitor_block, save_model, train_initial
from .simgen import (
    FAULTS,
    ROLE_NORMAL,
    ROLE_TEST,
    ROLE_TRAIN,
    generate_block,
    get_situation,
    inject_fault,
    read_block_csv,
    write_block_csv,
)

EXIT_OK, EXIT_GATE, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("pca_ewc")


def _configure_logging():
    level = os.environ.get("PCA_EWC_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _config(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    return cfg.with_overrides(
        seed=getattr(args, "seed", None),
        n_runs=getattr(args, "runs", None),
        workers=getattr(args, "workers", None),
    )


def _require_dir(path):
    if not os.path.isdir(path):
        raise IoFailure(f"output directory {path!r} does not exist")


def _read_csv(path):
    try:
        return read_block_csv(path)
    except OSError as exc:
        raise IoFailure(f"cannot read {path!r}: {exc.strerror or exc}") from exc


def cmd_simulate(args):
    cfg = _config(args)
    out = args.out or cfg.output_dir
    _require_dir(out)
    sits = [get_situation(s) for s in cfg.scenarios]
    fault = FAULTS[cfg.sim_fault]
    n = cfg.block_size
    train_ids = sorted({1} | ({2} if any(s.model != "A" for s in sits) else set()))
    test_ids = sorted({s.test_data for s in sits})
    normal_ids = sorted({s.test_data for s in sits if s.scaler_from == "normal"})
    files = {}
    for d in train_ids:
        name = f"train{d}.csv"
        write_block_csv(os.path.join(out, name), generate_block(d, n, cfg.seed, ROLE_TRAIN, cfg.noise_std))
        files[name] = {"role": "train", "data_id": d}
    for d in test_ids:
        name = f"test{d}.csv"
        X, labels = inject_fault(generate_block(d, n, cfg.seed, ROLE_TEST, cfg.noise_std), fault)
        write_block_csv(os.path.join(out, name), X, labels)
        files[name] = {"role": "test", "data_id": d, "fault": cfg.sim_fault}
    for d in normal_ids:
        name = f"normal{d}.csv"
        X = generate_block(d, cfg.scaler_samples, cfg.seed, ROLE_NORMAL, cfg.noise_std)
        write_block_csv(os.path.join(out, name), X)
        files[name] = {"role": "normal", "data_id": d}
    manifest = {
        "seed": cfg.seed,
        "block_size": n,
        "noise_std": cfg.noise_std,
        "scenarios": list(cfg.scenarios),
        "fault": {"id": cfg.sim_fault, **fault.to_dict()},
        "files": files,
    }
    with open(os.path.join(out, "manifest.toml"), "wb") as fh:
        tomli_w.dump(manifest, fh)
    for name in files:
        print(os.path.join(out, name))
    return EXIT_OK


def _training_blocks(cfg):
    if cfg.train_data:
        return [_read_csv(p)[0] for p in cfg.train_data]
    ids = cfg.train_data_ids or (1,)
    return [generate_block(d, cfg.block_size, cfg.seed, ROLE_TRAIN, cfg.noise_std) for d in ids]


def cmd_train(args):
    cfg = _config(args)
    if args.plain:
        cfg = cfg.with_overrides(plain=True)
    blocks = _training_blocks(cfg)
    label = "Model C" if cfg.plain else "Model A"
    state = train_initial(
        blocks[0],
        cpv=cfg.cpv_threshold,
        lambda_mode=cfg.lambda_mode,
        lambda_prior=cfg.lambda_prior,
        alpha=cfg.alpha,
        n_components=cfg.n_components,
        label=label,
    )
    log.info("mode 1: %d components", state.n_components)
    for X in blocks[1:]:
        state = continual_update(state, X, cfg=cfg.dc_config())
        log.info("mode %d: solver %s", state.mode_index, state.solver)
    path = args.out or cfg.model_out or os.path.join(cfg.output_dir, "model.json")
    parent = os.path.dirname(path)
    if parent:
        _require_dir(parent)
    save_model(state, path)
    print(f"{state.label}: {state.n_components} components, {state.mode_index} mode(s) -> {path}")
    return EXIT_OK


def cmd_monitor(args):
    try:
        state = load_model(args.model)
    except OSError as exc:
        raise IoFailure(f"cannot read model {args.model!r}: {exc.strerror or exc}") from exc
    X, labels, _ = _read_csv(args.test)
    scaler = fit_scaler(_read_csv(args.scaler_data)[0]) if args.scaler_data else None
    series = monitor_block(state, X, scaler)
    if args.out:
        parent = os.path.dirname(args.out)
        if parent:
            _require_dir(parent)
        series.write_csv(args.out)
    if labels is not None and labels.any():
        onset = int(np.flatnonzero(labels)[0])
        m = compute_metrics(series.alarms, onset)
        dd = "-" if m.dd is None else str(m.dd)
        print(f"{state.label}: FDR={m.fdr:.2f}% FAR={m.far:.2f}% DD={dd}")
    else:
        print(f"{state.label}: {len(series)} samples, alarm rate {100 * series.alarm_rate:.2f}%")
    return EXIT_OK


def cmd_evaluate(args):
    cfg = _config(args)
    out = args.out or cfg.output_dir
    summary = run_experiments(cfg.experiment_config(), cfg.n_runs, cfg.seed, cfg.workers)
    for p in emit_report(summary, out, charts=not args.no_charts):
        log.info("wrote %s", p)
    for (s, f), c in sorted(summary.cells.items()):
        dd = "-" if c.dd_mean is None else f"{c.dd_mean:.2f}"
        print(f"situation {s} fault {f}: FDR={c.fdr_mean:.2f}% FAR={c.far_mean:.2f}% DD={dd}")
    if not args.gate:
        return EXIT_OK
    results = gate(summary)
    for name, ok, detail in results:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_GATE


def build_parser():
    p = argparse.ArgumentParser(prog="pca-ewc", description="Continual PCA process monitoring.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="TOML run configuration")
        sp.add_argument("--seed", type=int, help="override the base seed")
        sp.add_argument("--out", help="output directory or file")

    sp = sub.add_parser("simulate", help="write simulated training/test CSV files")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("train", help="train a model file")
    common(sp)
    sp.add_argument("--plain", action="store_true", help="plain PCA on a single block")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("monitor", help="monitor a test CSV with a model file")
    sp.add_argument("--model", required=True)
    sp.add_argument("--test", required=True)
    sp.add_argument("--scaler-data", help="normal-operation CSV of the test mode")
    sp.add_argument("--out", help="statistics CSV to write")
    sp.set_defaults(func=cmd_monitor)

    sp = sub.add_parser("evaluate", help="repeated experiments and report")
    common(sp)
    sp.add_argument("--runs", type=int, help="override n_runs")
    sp.add_argument("--workers", type=int, help="process count")
    sp.add_argument("--gate", action="store_true", help="exit 1 unless all gate checks pass")
    sp.add_argument("--no-charts", action="store_true")
    sp.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None):
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PcaEwcError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

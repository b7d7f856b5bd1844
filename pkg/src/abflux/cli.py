"""Command-line entry point: ``abflux {simulate,sweep,average,asymptotics,verify}``."""
from __future__ import annotations

import argparse
import itertools
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .actionangle import ActionAngleState
from .asymptotics import FUTURE, PAST, fit_constants, transport_coefficients
from .averaging import AveragedField, AveragedState, averaging_error_experiment, integrate_averaged
from .config import RunConfig, load_config, preset
from .dynamics import detect_hitting_time, integrate
from .errors import ABFluxError, ConfigError, InvalidParameterError
from .verify import SUITES, run_suite

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4
log = logging.getLogger("abflux")

SWEEP_COLUMNS = ("index", "B", "Phi0", "I1", "I2", "status", "f", "s0", "a0", "b0", "K",
                 "a0_tilde", "b0_tilde", "drift_magnitude", "drift_angle", "energy_limit",
                 "past_energy_slope", "measured_past_energy_slope", "measured_drift_ratio",
                 "low_confidence")


def _out(args, cfg: RunConfig, key: str, default: str) -> Path:
    name = cfg.outputs.get(key, default)
    path = Path(name)
    return path if path.is_absolute() else Path(args.out) / path


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, args) -> int:
    traj = integrate(cfg.initial, cfg.s_span, cfg.params, cfg.integrator)
    outputs = cfg.outputs or {"trajectory_csv": "trajectory.csv"}
    if "trajectory_csv" in outputs:
        io.write_trajectory_csv(_out(args, cfg, "trajectory_csv", ""), traj)
    if "events_json" in outputs:
        io.write_events_json(_out(args, cfg, "events_json", ""), traj.events)
    if "plot_data" in outputs:
        io.write_plot_data(_out(args, cfg, "plot_data", ""), traj)
    if "constants_json" in outputs:
        rec = {"truncated": traj.truncated, "events": len(traj.events)}
        try:
            hit = detect_hitting_time(traj)
            rec.update(s0=hit.s0, linear_law=hit.linear_law)
        except ABFluxError as exc:
            rec["s0"] = None
            rec["note"] = str(exc)
        io.write_json(_out(args, cfg, "constants_json", ""), rec)
    log.info("simulate: %d samples, %d events", len(traj), len(traj.events))
    return EXIT_NUMERIC if traj.truncated else EXIT_OK


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------

def _sweep_cells(cfg: RunConfig):
    keys = list(cfg.sweep)
    grids = [list(np.atleast_1d(cfg.sweep[k]).astype(float)) for k in keys]
    for idx, values in enumerate(itertools.product(*grids)):
        yield idx, dict(zip(keys, values))


def _fit_run(cfg: RunConfig):
    """Integrate, fit future/past constants where the span allows, and build the transport record."""
    traj = integrate(cfg.initial, cfg.s_span, cfg.params, cfg.integrator)
    if traj.truncated:
        raise ABFluxError("integration truncated near the puncture")
    consts = None
    win = cfg.asymptotics
    for direction, key in ((FUTURE, "future_window"), (PAST, "past_window")):
        if (direction == FUTURE and traj.s[-1] > 0) or (direction == PAST and traj.s[0] < 0):
            c = fit_constants(traj, direction, win.get(key))
            consts = c if consts is None else consts.merge(c)
    if consts is None:
        raise ABFluxError("span contains no asymptotic window")
    return traj, transport_coefficients(consts, cfg.params, traj)


def _sweep_cell(job):
    idx, cell, cfg = job
    row = {"index": idx, "B": cfg.params.B, "Phi0": cfg.params.Phi0,
           "I1": getattr(cfg.initial, "I1", math.nan), "I2": getattr(cfg.initial, "I2", math.nan)}
    try:
        params = replace(cfg.params, **{k: v for k, v in cell.items() if k in ("B", "Phi0")})
        initial = cfg.initial
        if "I1" in cell or "I2" in cell:
            initial = replace(initial, **{k: v for k, v in cell.items() if k in ("I1", "I2")})
        cfg = replace(cfg, params=params, initial=initial)
        row.update(B=params.B, Phi0=params.Phi0, I1=getattr(initial, "I1", math.nan),
                   I2=getattr(initial, "I2", math.nan), f=params.f)
        _, rec = _fit_run(cfg)
        row.update(status="ok", s0=rec.s0, a0=rec.a0, b0=rec.b0, K=rec.K,
                   a0_tilde=rec.a0_tilde, b0_tilde=rec.b0_tilde,
                   drift_magnitude=rec.drift_magnitude, drift_angle=rec.drift_angle,
                   energy_limit=rec.energy_limit, past_energy_slope=rec.past_energy_slope,
                   measured_past_energy_slope=rec.measured.get("past_energy_slope", math.nan),
                   measured_drift_ratio=rec.measured.get("drift_ratio", math.nan),
                   low_confidence=int(rec.low_confidence))
    except (ABFluxError, ValueError, ArithmeticError) as exc:
        row["status"] = "failed: " + str(exc).replace(",", ";").replace("\n", " ")
    return row


def _fmt(v):
    if isinstance(v, str):
        return v
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v


def cmd_sweep(cfg: RunConfig, args) -> int:
    if not cfg.sweep:
        raise ConfigError("sweep needs a [sweep] grid")
    jobs = [(i, cell, cfg) for i, cell in _sweep_cells(cfg)]
    if args.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as ex:
            rows = list(ex.map(_sweep_cell, jobs))
    else:
        rows = [_sweep_cell(j) for j in jobs]
    rows.sort(key=lambda r: r["index"])
    path = _out(args, cfg, "sweep_csv", "sweep.csv")
    with open(path, "w") as fh:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(r.get(k, math.nan)) for k in SWEEP_COLUMNS) + "\n")
    failed = sum(1 for r in rows if r["status"] != "ok")
    log.info("sweep: %d cells, %d failed", len(rows), failed)
    return EXIT_OK


# --------------------------------------------------------------------------
# average
# --------------------------------------------------------------------------

def cmd_average(cfg: RunConfig, args) -> int:
    if not isinstance(cfg.initial, ActionAngleState):
        raise ConfigError("average needs an action-angle initial condition")
    opts = cfg.average
    f_values = [float(x) for x in opts.get("f_values", (0.02, 0.01, 0.005))]
    tab = averaging_error_experiment(cfg.initial, f_values, cfg.params, float(opts.get("T", 10.0)),
                                     cfg.integrator, threads=args.threads,
                                     dt=float(opts.get("dt", 0.05)))
    io.write_error_table_csv(_out(args, cfg, "error_table_csv", "error_table.csv"), tab)
    if "averaged_csv" in cfg.outputs:
        ini = cfg.initial
        atr = integrate_averaged(AveragedState(ini.s, ini.phi1, ini.I1, ini.I2, ini.phi2),
                                 AveragedField(cfg.params), cfg.s_span,
                                 sample_step=cfg.integrator.sample_step)
        cols = atr.columns()
        io.write_columns_csv(_out(args, cfg, "averaged_csv", ""), cols, list(cols))
    print(json.dumps({"exponent": tab.exponent, "constant": tab.constant,
                      "rows": tab.rows()}))
    return EXIT_OK


# --------------------------------------------------------------------------
# asymptotics
# --------------------------------------------------------------------------

def cmd_asymptotics(cfg: RunConfig, args) -> int:
    if not cfg.params.potential.is_zero:
        raise ConfigError("asymptotics requires V = 0")
    traj, rec = _fit_run(cfg)
    io.write_json(_out(args, cfg, "constants_json", "constants.json"), rec.to_dict())
    if "trajectory_csv" in cfg.outputs:
        io.write_trajectory_csv(_out(args, cfg, "trajectory_csv", ""), traj)
    return EXIT_OK


# --------------------------------------------------------------------------
# verify
# --------------------------------------------------------------------------

def cmd_verify(suite: str, args) -> int:
    report = run_suite(suite)
    text = json.dumps({"suite": suite, "checks": report,
                       "passed": all(r["passed"] for r in report)}, indent=2)
    print(text)
    if args.out_given:
        (Path(args.out) / "verify_report.json").write_text(text + "\n")
    return EXIT_OK if all(r["passed"] for r in report) else EXIT_VERIFY


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML or JSON run configuration")
    common.add_argument("--out", default=None, help="output directory (default: .)")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker processes for sweeps and error experiments")
    common.add_argument("--preset", choices=("fig1",), help="built-in configuration")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="abflux", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, hlp in (("simulate", "integrate one trajectory"),
                      ("sweep", "grid over B, Phi0 and initial actions"),
                      ("average", "full-vs-averaged error experiment"),
                      ("asymptotics", "fit asymptotic constants and transport coefficients")):
        sub.add_parser(name, parents=[common], help=hlp)
    v = sub.add_parser("verify", parents=[common], help="run invariant suites")
    v.add_argument("suite", nargs="?", default="all", choices=SUITES + ("all",))
    return p


def _load(args) -> RunConfig:
    if args.config and args.preset:
        raise ConfigError("--config and --preset are mutually exclusive")
    if args.preset:
        return preset(args.preset)
    if not args.config:
        raise ConfigError("--config PATH or --preset is required")
    return load_config(args.config)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    args.out_given = args.out is not None
    args.out = args.out or "."
    args.threads = max(1, args.threads)
    try:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        if args.command == "verify":
            return cmd_verify(args.suite, args)
        cfg = _load(args)
        handler = {"simulate": cmd_simulate, "sweep": cmd_sweep, "average": cmd_average,
                   "asymptotics": cmd_asymptotics}[args.command]
        return handler(cfg, args)
    except (ConfigError, InvalidParameterError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ABFluxError, ArithmeticError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

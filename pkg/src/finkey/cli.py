"""Command-line front end: ``finkey {simulate,estimate,bound,heatmap,keygen}``.

Exit codes: 0 on success (an infeasible bound is a valid result), 2 on
input or validation errors, 1 on internal errors. Every output file is
written atomically and is a deterministic function of the command line.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import sim
from .errors import ValidationError
from .finlen import SecrecyTargets, optimize, ReconciliationModel
from .pipeline import key_diagnostics, run_skg
from .stats import (
    ESTIMATOR_ID,
    HybridJointModel,
    SourceSummary,
    decorrelation_lag,
    fit_joint_model,
    mutual_information,
    normalized_secrecy_rate,
)
from .traces import (
    QuantizationScheme,
    write_atomic,
    load_traces,
    make_sample_table,
    read_sample_table,
    write_sample_table,
    write_traces,
)
from .typicality import ExponentCache

DEFAULT_N_GRID = (1000, 2000, 5000, 10000, 20000, 50000)
BOUND_CSV_HEADER = "n,k,eta,delta5,feasible,eps,eps_prime,b0,b1,alpha1,alpha2"
DEFAULT_ZQ_LEVELS = {1: 91, 2: 10}


def _dump_json(obj, path):
    write_atomic(path, json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _clean(v):
    """JSON-safe copy: non-finite floats become strings."""
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from None


def _n_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("n values must be positive")
    return values


def _lag(text):
    if text == "auto":
        return text
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--lag must be an integer or 'auto', got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError("--lag must be >= 1")
    return v


def _u64(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--seed must be an integer, got {text!r}")
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("--seed must be an unsigned 64-bit integer")
    return v


def _beta(text):
    v = float(text)
    if not 0 <= v <= 1:
        raise argparse.ArgumentTypeError("--beta must lie in [0, 1]")
    return v


def _config(args):
    cfg = sim.load_config(args.config) if args.config else sim.EnvironmentConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _targets(args):
    return SecrecyTargets(args.eps_l, args.eps_u)


def _load_model(path):
    doc = _read_json(path)
    return HybridJointModel.from_dict(doc.get("model", doc))


# ----------------------------------------------------------------------
# commands


def cmd_simulate(args):
    cfg = _config(args)
    write_traces(sim.simulate(cfg), args.out)
    return 0


def cmd_estimate(args):
    traces = load_traces(args.input)
    x_levels = 2 ** args.xq_bits
    x_scheme = QuantizationScheme.from_data(traces.g_ba, x_levels)
    y_scheme = QuantizationScheme.from_data(traces.g_ab, x_levels)
    curve = None
    if args.lag == "auto":
        selection = decorrelation_lag(traces.g_ab, y_scheme, args.threshold)
        lag, curve = selection.lag, [list(p) for p in selection.curve]
    else:
        lag = args.lag
    table = make_sample_table(traces, lag, x_scheme, y_scheme, args.z_dims)
    z_levels = args.zq_levels or DEFAULT_ZQ_LEVELS[args.z_dims]
    model = fit_joint_model(table, z_levels)
    summary = SourceSummary.from_model(model)
    doc = {
        "format": "finkey.stats/1",
        "estimator": {"mutual_information": ESTIMATOR_ID, "joint_model": model.estimator},
        "lag": lag,
        "lag_threshold_bits": args.threshold if args.lag == "auto" else None,
        "lag_curve": curve,
        "rows": len(table),
        "h_x": summary.h_x,
        "h_x_given_z": summary.h_x_given_z,
        "i_xy": summary.i_xy,
        "i_xz": summary.i_xz,
        "i_xy_given_z": mutual_information(model, "xy|z"),
        "r_low": summary.r_low,
        "model": model.to_dict(),
    }
    table_path = args.table or str(Path(args.out).with_suffix(".table.csv"))
    write_sample_table(table, table_path)
    _dump_json(_clean(doc), args.out)
    return 0


def cmd_bound(args):
    model = _load_model(args.model)
    summary = SourceSummary.from_model(model)
    rec = ReconciliationModel(args.beta, summary.h_x, summary.i_xy)
    cache = ExponentCache.from_model(model)
    targets = _targets(args)
    reports = [optimize(n, targets, summary, rec, cache) for n in args.n]
    rows = [BOUND_CSV_HEADER]
    for r in reports:
        p = r.params.astuple() if r.params else (float("nan"),) * 6
        d5 = r.deltas.d5 if r.deltas else float("nan")
        eta = r.eta if r.eta is not None else float("nan")
        rows.append(",".join([str(r.n), str(r.k_bar), repr(eta), repr(d5),
                              "true" if r.feasible else "false", *map(repr, p)]))
    write_atomic(args.out, "\n".join(rows) + "\n")
    json_path = args.json or str(Path(args.out).with_suffix(".json"))
    _dump_json(_clean([r.to_dict() for r in reports]), json_path)
    return 0


def cmd_heatmap(args):
    cfg = _config(args)
    if args.grid:
        nx, ny = args.grid
        grid = sim.default_grid(cfg, nx, ny)
    else:
        grid = sim.default_grid(cfg)
    levels = 2 ** args.xq_bits
    rows = ["x,y,nsr"]
    for (x, y), traces in sim.position_sweep(cfg, grid):
        tr = traces.calibrated()
        scheme = QuantizationScheme.from_data(np.concatenate([tr.g_ab, tr.g_ae]), levels)
        rows.append(f"{x!r},{y!r},{normalized_secrecy_rate(tr.g_ab, tr.g_ae, scheme)!r}")
    write_atomic(args.out, "\n".join(rows) + "\n")
    return 0


def cmd_keygen(args):
    table = read_sample_table(args.table)
    model = _load_model(args.model)
    if len(args.n) != 1:
        raise ValidationError("keygen takes a single --n value")
    pair, report = run_skg(table, args.n[0], model, args.beta, _targets(args), args.seed)
    doc = {
        "format": "finkey.keypair/1",
        "seed": args.seed,
        "key": pair.to_dict(),
        "report": report.to_dict(),
        "diagnostics": key_diagnostics(pair.alice_key),
    }
    _dump_json(_clean(doc), args.out)
    return 0


# ----------------------------------------------------------------------
# argument parsing


def _grid(text):
    try:
        nx, ny = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"--grid must look like 10x6, got {text!r}")
    if nx < 1 or ny < 1:
        raise argparse.ArgumentTypeError("--grid sizes must be positive")
    return nx, ny


def build_parser():
    parser = argparse.ArgumentParser(
        prog="finkey",
        description="Finite-length secret-key lengths from channel-gain observations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_default=42):
        p.add_argument("--out", required=True, help="output file path")
        p.add_argument("--seed", type=_u64, default=seed_default, help="RNG seed (u64)")

    def bound_flags(p, n_default):
        p.add_argument("--n", type=_n_list, default=n_default, help="comma-separated block lengths")
        p.add_argument("--beta", type=_beta, default=0.9, help="reconciliation efficiency (default 0.9)")
        p.add_argument("--eps-l", type=float, default=1e-3, help="leakage budget (default 1e-3)")
        p.add_argument("--eps-u", type=float, default=1e-3, help="uniformity budget (default 1e-3)")

    p = sub.add_parser("simulate", help="write a synthetic trace CSV")
    p.add_argument("--config", help="TOML environment config (defaults documented in finkey.sim)")
    common(p, None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate source statistics and the joint model")
    p.add_argument("--in", dest="input", required=True, help="trace CSV")
    p.add_argument("--table", help="sample-table output (default: <out>.table.csv)")
    p.add_argument("--xq-bits", type=int, default=4, help="bits per X_Q/Y_Q symbol (default 4)")
    p.add_argument("--zq-levels", type=int, default=None,
                   help="Z cells per dimension (default 91 for scalar Z, 10 for 2-D Z)")
    p.add_argument("--z-dims", type=int, choices=(1, 2), default=2, help="Z = g_ae or (g_ae, g_be)")
    p.add_argument("--lag", type=_lag, default="auto", help="downsampling lag or 'auto'")
    p.add_argument("--threshold", type=float, default=0.05, help="lag-MI threshold in bits")
    common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bound", help="optimize the finite-length key length over --n")
    p.add_argument("--model", required=True, help="stats JSON from 'estimate'")
    p.add_argument("--json", help="JSON report output (default: <out>.json)")
    bound_flags(p, list(DEFAULT_N_GRID))
    common(p)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("heatmap", help="normalized secrecy rate over Eve positions")
    p.add_argument("--config", help="TOML environment config")
    p.add_argument("--grid", type=_grid, help="Eve grid NXxNY of cell centres (default 10x6)")
    p.add_argument("--xq-bits", type=int, default=4, help="quantizer bits for the rate estimate")
    common(p, None)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("keygen", help="generate a key pair from a sample table")
    p.add_argument("--table", required=True, help="sample table from 'estimate'")
    p.add_argument("--model", required=True, help="stats JSON from 'estimate'")
    bound_flags(p, [10000])
    common(p)
    p.set_defaults(func=cmd_keygen)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    if getattr(args, "xq_bits", 1) < 1 or (getattr(args, "zq_levels", None) or 2) < 2:
        print("finkey: error: --xq-bits must be >= 1 and --zq-levels >= 2", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ValidationError, OSError, ValueError) as exc:
        print(f"finkey: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"finkey: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

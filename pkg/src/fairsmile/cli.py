"""Command-line entry point.

Subcommands::

    simulate   generate a path ensemble (binary file, or CSV matrix)
    estimate   smile coefficients per horizon from an ensemble or a sample file
    edgeworth  moments and cumulant-expansion coefficients
    ingest     OHLC CSV -> per-regime sample files and a skew/curvature table
    report     join estimate/ingest tables into one long-format table

Table columns (all dimensionless, in units of the horizon return's std):

    horizon_days   option maturity T in trading days
    regime         all | high_vol | low_vol
    method         exotic_mc | iv_fit | edgeworth
    alpha, beta, gamma (+ _se)   smile level, skew, curvature
    skew_over_6    sample skewness / 6
    kurt_over_24   sample excess kurtosis / 24
    median         median of the standardized return
    n              number of paths or windows

Exit codes: 0 success, 1 runtime failure, 2 usage error. Data goes to stdout
when --output is omitted; progress and warnings go to stderr.

Flags may also come from ``--config FILE`` (JSON object whose keys are the
flag names, dashes or underscores); flags on the command line win.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import io
import json
import logging
import math
import sys
import warnings
from pathlib import Path
from typing import Sequence

from . import __version__
from .core import Regime, SampleSet, compute_moments
from .hedge import HedgeConfig, smile_via_exotics
from .marketdata import (build_return_windows, parse_ohlc_csv, read_sample_set,
                         write_sample_set)
from .models import (DEFAULT_HISTORY_DAYS, GaarchParams, NonlinearLeverageParams, PathEnsemble,
                     export_ensemble_csv, import_ensemble_csv, load_ensemble, save_ensemble,
                     simulate_gaarch, simulate_gaussian, simulate_nonlinear_leverage)
from .pricing import DEFAULT_MONEYNESS_GRID, fit_smile_from_paths
from .smile import KernelConfig, edgeworth_coefficients, sample_smile

log = logging.getLogger("fairsmile")

TABLE_COLUMNS = ["horizon_days", "regime", "method", "alpha", "beta", "gamma", "alpha_se",
                 "beta_se", "gamma_se", "skew_over_6", "kurt_over_24", "median", "n"]
REPORT_COLUMNS = ["horizon_days", "regime", "method", "quantity", "value", "se", "source"]


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def _float_list(text: str) -> list[float]:
    return [float(x) for x in str(text).split(",") if x.strip()]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--threads", type=int, default=1, help="worker threads; affects wall time only")
    p.add_argument("--output", "-o", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="table format")
    p.add_argument("--config", default=None, help="JSON file with flag values")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairsmile", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a path ensemble")
    _add_common(p)
    p.add_argument("--model", choices=("gaussian", "nonlinear", "gaarch"), default=None,
                   help="return model (required)")
    p.add_argument("--vol", type=float, default=0.01, help="base vol per sqrt(day)")
    p.add_argument("--epsilon", type=float, default=0.1, help="nonlinear: leverage amplitude")
    p.add_argument("--theta", type=float, default=0.0, help="nonlinear: threshold")
    p.add_argument("--omega", type=float, default=0.1, help="nonlinear: memory rate per day")
    p.add_argument("--rho", type=float, default=0.9, help="gaarch: persistence")
    p.add_argument("--nu", type=float, default=0.1, help="gaarch: feedback")
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--horizon", type=int, default=20, help="days per path")
    p.add_argument("--history-days", type=int, default=DEFAULT_HISTORY_DAYS,
                   help="pre-window days used for the regime split (0 disables)")
    p.add_argument("--ensemble-format", choices=("binary", "csv"), default="binary")

    p = sub.add_parser("estimate", help="smile coefficients from an ensemble or sample file")
    _add_common(p)
    p.add_argument("--input", "-i", default=None, help="ensemble (.bin/.csv matrix) or sample file")
    p.add_argument("--horizons", default=None, help="e.g. 1-20 or 5,10,20 (ensembles only)")
    p.add_argument("--regime", choices=[r.value for r in Regime], default="all")
    p.add_argument("--methods", default="exotic_mc,edgeworth",
                   help="comma list of exotic_mc, iv_fit, edgeworth")
    p.add_argument("--no-hedge", action="store_true", help="disable the delta control variate")
    p.add_argument("--rebalance-every", type=int, default=1)
    p.add_argument("--deltas", default=None, help="kernel widths, decreasing")
    p.add_argument("--extrapolation-order", type=int, default=4)
    p.add_argument("--moneyness", default=",".join(str(m) for m in DEFAULT_MONEYNESS_GRID))
    p.add_argument("--n-boot", type=int, default=200, help="bootstrap replicates (sample input)")

    p = sub.add_parser("edgeworth", help="moments and cumulant-expansion coefficients")
    _add_common(p)
    p.add_argument("--input", "-i", default=None)
    p.add_argument("--horizons", default=None)
    p.add_argument("--regime", choices=[r.value for r in Regime], default="all")

    p = sub.add_parser("ingest", help="OHLC CSV to per-regime samples and tables")
    _add_common(p)
    p.add_argument("--input", "-i", default=None, help="CSV with date,open,high,low,close")
    p.add_argument("--horizons", default="1-20")
    p.add_argument("--sample-dir", default=None, help="write one sample file per T and regime")
    p.add_argument("--n-boot", type=int, default=200)
    p.add_argument("--block-bootstrap", action="store_true",
                   help="moving-block bootstrap with block length T (overlapping windows)")

    p = sub.add_parser("report", help="join tables into long format")
    _add_common(p)
    p.add_argument("inputs", nargs="*", help="CSV tables from estimate/ingest")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            cfg = json.loads(Path(known.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config {known.config}: {exc}")
        if not isinstance(cfg, dict):
            parser.error("config must be a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        cmd = next((a for a in argv if not a.startswith("-")), None)
        subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        if cmd in subparsers.choices:
            subparsers.choices[cmd].set_defaults(**cfg)
    return parser.parse_args(argv)


def _write_table(rows: list[dict], columns: list[str], args) -> None:
    if args.format == "json":
        text = json.dumps([{c: r.get(c) for c in columns} for r in rows], indent=2) + "\n"
    else:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: _fmt(r.get(c)) for c in columns})
        text = buf.getvalue()
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return v


def _load_input(path: str | None) -> PathEnsemble | SampleSet:
    if not path:
        raise UsageError("--input is required")
    p = Path(path)
    if not p.exists():
        raise UsageError(f"input not found: {path}")
    with p.open("rb") as fh:
        head = fh.read(6)
    if head == b"FSENS1":
        return load_ensemble(p)
    with p.open() as fh:
        first = fh.readline().strip()
    if first == "u":
        return read_sample_set(p)
    if first.startswith("step_"):
        return import_ensemble_csv(p)
    raise ValueError(f"{path}: unrecognized input format")


def _row(c, regime: str, m=None, n: int | None = None) -> dict:
    row = {"horizon_days": c.horizon_days, "regime": regime, "method": c.method.value,
           "alpha": c.alpha, "beta": c.beta, "gamma": c.gamma,
           "alpha_se": c.alpha_se, "beta_se": c.beta_se, "gamma_se": c.gamma_se,
           "skew_over_6": float("nan"), "kurt_over_24": float("nan"), "median": float("nan"),
           "n": n}
    if m is not None:
        row.update(skew_over_6=m.skewness / 6.0, kurt_over_24=m.excess_kurtosis / 24.0,
                   median=m.median, n=m.count)
    return row


def _kernel(args, n: int) -> KernelConfig:
    if args.deltas:
        return KernelConfig(tuple(_float_list(args.deltas)), args.extrapolation_order)
    return KernelConfig.default(n, args.extrapolation_order)


def _horizons(args, e: PathEnsemble) -> list[int]:
    hs = _int_list(args.horizons) if args.horizons else [e.n_steps]
    bad = [h for h in hs if not 1 <= h <= e.n_steps]
    if not hs or bad:
        raise UsageError(f"horizons must lie in 1..{e.n_steps}")
    return hs


def cmd_simulate(args) -> int:
    if not args.model:
        raise UsageError("--model is required")
    if not args.output:
        raise UsageError("--output is required for simulate")
    common = dict(horizon_days=args.horizon, n_paths=args.paths, seed=args.seed,
                  history_days=args.history_days, threads=args.threads)
    if args.model == "gaussian":
        e = simulate_gaussian(args.vol, **common)
    elif args.model == "nonlinear":
        p = NonlinearLeverageParams(args.vol, args.epsilon, args.theta, args.omega)
        e = simulate_nonlinear_leverage(p, **common)
    else:
        e = simulate_gaarch(GaarchParams(args.vol, args.rho, args.nu), **common)
    out = Path(args.output)
    if args.ensemble_format == "csv":
        export_ensemble_csv(e, out)
    else:
        save_ensemble(e, out)
    meta = {**e.meta, "n_paths": e.n_paths, "n_steps": e.n_steps, "seed": e.seed,
            "format": args.ensemble_format,
            "created": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")}
    out.with_suffix(out.suffix + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    log.info("wrote %d x %d ensemble to %s", e.n_paths, e.n_steps, out)
    return 0


def _estimate_rows(obj, args, methods: list[str]) -> list[dict]:
    rows = []
    if isinstance(obj, SampleSet):
        m = compute_moments(obj)
        for method in methods:
            if method == "exotic_mc":
                c = sample_smile(obj, _kernel(args, len(obj)), args.n_boot, args.seed)
                rows.append(_row(c, obj.regime.value, m))
            elif method == "edgeworth":
                rows.append(_row(edgeworth_coefficients(m, obj.horizon_days), obj.regime.value, m))
            else:
                raise UsageError("iv_fit needs a path ensemble input")
        return rows
    base = obj.regime(args.regime)
    h = HedgeConfig(enabled=not args.no_hedge, rebalance_every=args.rebalance_every)
    grid = _float_list(args.moneyness)
    for T in _horizons(args, base):
        e = base.truncate(T)
        m = compute_moments(e.sample_set())
        for method in methods:
            if method == "exotic_mc":
                c = smile_via_exotics(e, _kernel(args, e.n_paths), h)
            elif method == "iv_fit":
                c = fit_smile_from_paths(e, grid, h)
            else:
                c = edgeworth_coefficients(m, T)
            rows.append(_row(c, args.regime, m))
        log.info("T=%d done", T)
    return rows


def cmd_estimate(args) -> int:
    methods = [x.strip() for x in args.methods.split(",") if x.strip()]
    unknown = set(methods) - {"exotic_mc", "iv_fit", "edgeworth"}
    if not methods or unknown:
        raise UsageError(f"unknown methods: {', '.join(sorted(unknown)) or '(none)'}")
    rows = _estimate_rows(_load_input(args.input), args, methods)
    _write_table(rows, TABLE_COLUMNS, args)
    return 0


def cmd_edgeworth(args) -> int:
    obj = _load_input(args.input)
    rows = []
    if isinstance(obj, SampleSet):
        m = compute_moments(obj)
        rows.append(_row(edgeworth_coefficients(m, obj.horizon_days), obj.regime.value, m))
    else:
        base = obj.regime(args.regime)
        for T in _horizons(args, base):
            m = compute_moments(base.truncate(T).sample_set())
            rows.append(_row(edgeworth_coefficients(m, T), args.regime, m))
    _write_table(rows, TABLE_COLUMNS, args)
    return 0


def cmd_ingest(args) -> int:
    if not args.input:
        raise UsageError("--input is required")
    if not Path(args.input).exists():
        raise UsageError(f"input not found: {args.input}")
    series = parse_ohlc_csv(args.input)
    outdir = Path(args.sample_dir) if args.sample_dir else None
    if outdir:
        outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for T in _int_list(args.horizons):
        for regime in (Regime.HIGH_VOL, Regime.LOW_VOL):
            s = build_return_windows(series, T, regime)
            m = compute_moments(s)
            block = T if args.block_bootstrap and T > 1 else None
            c = sample_smile(s, KernelConfig.default(len(s)), args.n_boot, args.seed, block)
            rows.append(_row(c, regime.value, m))
            rows.append(_row(edgeworth_coefficients(m, T), regime.value, m))
            if outdir:
                s.meta["bootstrap"] = "block" if block else "iid (overlap not corrected)"
                write_sample_set(s, outdir / f"u_T{T:02d}_{regime.value}.csv")
    _write_table(rows, TABLE_COLUMNS, args)
    return 0


def _read_table(path: Path) -> list[dict]:
    text = path.read_text()
    if text.lstrip().startswith("["):
        return json.loads(text)
    return list(csv.DictReader(io.StringIO(text)))


def cmd_report(args) -> int:
    if not args.inputs:
        raise UsageError("report needs at least one input table")
    out = []
    for name in args.inputs:
        path = Path(name)
        if not path.exists():
            raise UsageError(f"input not found: {name}")
        for r in _read_table(path):
            missing = [c for c in ("horizon_days", "regime", "method") if c not in r]
            if missing:
                raise ValueError(f"{name}: missing columns {', '.join(missing)}")
            for q in ("alpha", "beta", "gamma"):
                out.append({"horizon_days": int(r["horizon_days"]), "regime": r["regime"],
                            "method": r["method"], "quantity": q, "value": _num(r.get(q)),
                            "se": _num(r.get(f"{q}_se")), "source": path.name})
            for q in ("skew_over_6", "kurt_over_24"):
                if r.get("method") == "edgeworth" or _num(r.get(q)) is None:
                    continue
                out.append({"horizon_days": int(r["horizon_days"]), "regime": r["regime"],
                            "method": "moments", "quantity": q, "value": _num(r.get(q)),
                            "se": None, "source": path.name})
    # moment rows repeat once per method row of the same sample
    seen, rows = set(), []
    for r in out:
        key = (r["horizon_days"], r["regime"], r["method"], r["quantity"], r["source"])
        if key not in seen:
            seen.add(key)
            rows.append(r)
    rows.sort(key=lambda r: (r["regime"], r["horizon_days"], r["method"], r["quantity"],
                             r["source"]))
    _write_table(rows, REPORT_COLUMNS, args)
    return 0


def _num(v):
    if v is None or v == "":
        return None
    v = float(v)
    return None if math.isnan(v) else v


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "edgeworth": cmd_edgeworth,
            "ingest": cmd_ingest, "report": cmd_report}


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    warnings.simplefilter("default")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"fairsmile {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"fairsmile {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

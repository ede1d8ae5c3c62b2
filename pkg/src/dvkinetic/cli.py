"""Command-line interface: ``dvkinetic {simulate,bound,verify,fit,sweep}``.

Exit codes: 0 success, 1 verification failure or no certificate, 2 bad
configuration.  Errors are reported as one JSON object on stderr.  Set
``DVK_SINGLE_THREAD=1`` to force sweeps to run in-process, one at a time.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import checkpoint
from .config import SimConfig, parse_config
from .diagnostics import TimeSeriesTable
from .errors import ConfigurationError, DVKError
from .rates import certificates_for, fit_empirical_rate
from .simulation import initial_state, run

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
SINGLE_THREAD_ENV = "DVK_SINGLE_THREAD"


def _emit_error(code: str, message: str, **extra):
    print(json.dumps({"error": code, "message": message, **extra}), file=sys.stderr)


def _default_path(cfg: SimConfig, suffix: str) -> Path:
    stem = Path(cfg.source).stem if cfg.source else "run"
    return Path(f"{stem}{suffix}")


def _write_outputs(result, csv_path, ckpt_path):
    Path(csv_path).write_text(result.table.to_csv())
    checkpoint.save(ckpt_path, result.state, result.model, result.report.steps)


def cmd_simulate(args) -> int:
    cfg = parse_config(args.config)
    state = None
    if args.restore:
        state, _ = checkpoint.load(args.restore)
    result = run(cfg, state=state)
    csv_path = args.csv or cfg.csv_path or _default_path(cfg, ".csv")
    ckpt_path = args.checkpoint or cfg.checkpoint_path or _default_path(cfg, ".ckpt")
    _write_outputs(result, csv_path, ckpt_path)
    print(json.dumps({"csv": str(csv_path), "checkpoint": str(ckpt_path),
                      "steps": result.report.steps, "t": result.state.t}))
    return EXIT_OK


def cmd_bound(args) -> int:
    cfg = parse_config(args.config)
    state, stats = initial_state(cfg)
    model = cfg.model.build()
    bounds = certificates_for(model, cfg.dim, stats.m_inf, stats.M, stats.delta, cfg.c,
                              args.theorem or cfg.theorem)
    payload = bounds[0].to_dict() if len(bounds) == 1 else [b.to_dict() for b in bounds]
    text = json.dumps(payload, indent=2, sort_keys=True)
    if cfg.certificate_path:
        Path(cfg.certificate_path).write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = parse_config(args.config)
    result = run(cfg)
    if args.csv or cfg.csv_path:
        Path(args.csv or cfg.csv_path).write_text(result.table.to_csv())
    checks = result.checks()
    out = {
        "passed": result.passed,
        "checks": {k: {"ok": ok, "detail": d} for k, (ok, d) in checks.items()},
        "certificates": [b.to_dict() for b in result.bounds],
        "runtime": result.report.runtime,
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    if not result.bounds:
        _emit_error("no-certificate", result.report.certificate_error or "no certificate")
    elif not result.passed:
        failed = [k for k, (ok, _) in checks.items() if not ok]
        _emit_error("verification-failed", "invariant or certificate check failed", failed=failed)
    return EXIT_OK if result.passed else EXIT_FAIL


def cmd_fit(args) -> int:
    path = Path(args.csv)
    if not path.exists():
        raise ConfigurationError(f"CSV file {path} does not exist")
    table = TimeSeriesTable.from_csv(path.read_text())
    fit = fit_empirical_rate(table, window=tuple(args.window) if args.window else None)
    print(json.dumps(fit.to_dict(), sort_keys=True))
    return EXIT_OK


def parse_grid(specs) -> list[dict]:
    """``["model.alpha=0,0.5,1", "n=64,128"]`` -> cartesian product of overrides."""
    axes = []
    for spec in specs:
        key, sep, values = spec.partition("=")
        if not sep or not values:
            raise ConfigurationError(f"bad --grid entry {spec!r}; expected key=v1,v2,...")
        axes.append([(key.strip(), v.strip()) for v in values.split(",") if v.strip()])
    return [dict(combo) for combo in itertools.product(*axes)]


def _sweep_point(args):
    cfg, overrides, window = args
    point = cfg.with_overrides(**overrides)
    result = run(point)
    t_end = point.t_end
    lo, hi = window if window else (0.25 * t_end, t_end)
    try:
        fit = fit_empirical_rate(result.table, window=(lo, hi))
        lam_emp, r2 = fit.lambda_emp, fit.r_squared
    except ValueError:
        lam_emp = r2 = float("nan")
    bound = result.bounds[0] if result.bounds else None
    return {
        **overrides,
        "theorem": bound.theorem.value if bound else "",
        "lambda": bound.lam if bound else float("nan"),
        "Lambda": bound.Lambda if bound else float("nan"),
        "lambda_emp": lam_emp,
        "r_squared": r2,
        "passed": result.passed,
    }


def sweep(cfg: SimConfig, points: list[dict], workers: int = 1, window=None) -> list[dict]:
    for p in points:
        cfg.with_overrides(**p)  # validate every point before starting work
    jobs = [(cfg, p, window) for p in points]
    if os.environ.get(SINGLE_THREAD_ENV) or workers <= 1:
        return [_sweep_point(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_point, jobs))


def cmd_sweep(args) -> int:
    cfg = parse_config(args.config)
    points = parse_grid(args.grid)
    rows = sweep(cfg, points, args.workers, tuple(args.fit_window) if args.fit_window else None)
    buf = io.StringIO()
    keys = list(points[0]) if points else []
    w = csv.DictWriter(buf, fieldnames=keys + ["theorem", "lambda", "Lambda", "lambda_emp",
                                                "r_squared", "passed"], lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    sys.stdout.write(buf.getvalue())
    return EXIT_OK if all(r["passed"] for r in rows) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dvkinetic", description="Discrete velocity kinetic models: "
                                 "simulation and decay certificates")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a config, write CSV and a final checkpoint")
    p.add_argument("config")
    p.add_argument("--csv")
    p.add_argument("--checkpoint")
    p.add_argument("--restore", help="start from this checkpoint instead of the preset")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bound", help="print the JSON decay certificate (no simulation)")
    p.add_argument("config")
    p.add_argument("--theorem", help="override [certificate] theorem")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("verify", help="simulate and check the certificate and invariants")
    p.add_argument("config")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("fit", help="fit an empirical decay rate to a CSV time series")
    p.add_argument("csv")
    p.add_argument("--window", nargs=2, type=float, metavar=("T_LO", "T_HI"))
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep", help="one run per grid point; aggregate CSV")
    p.add_argument("config")
    p.add_argument("--grid", action="append", required=True, metavar="KEY=V1,V2,...")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--fit-window", nargs=2, type=float, metavar=("T_LO", "T_HI"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        _emit_error(exc.code, str(exc))
        return EXIT_CONFIG
    except DVKError as exc:
        _emit_error(exc.code, str(exc), **({"step": exc.step} if getattr(exc, "step", None) else {}))
        return EXIT_FAIL
    except (OSError, ValueError) as exc:
        _emit_error("input", str(exc))
        return EXIT_CONFIG

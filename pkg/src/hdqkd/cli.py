"""Command-line front end.

Units everywhere: lengths in km, intensities in mean photons per pulse, rates
in secret bits per pulse. Exit codes: 0 success, 1 computation/domain failure,
2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys

import numpy as np

from . import calibration, optimize, rates, sim, textio
from .channel import DELTA_MODES, WORST_CASE, ChannelParams, transmittance
from .homodyne import DetectionPolicy

SWEEP_COLUMNS = ("e", "a", "p_D", "delta", "eta1", "R_bits_per_pulse")
SWEEP_UNITS = {"length": "length_km", "threshold": "threshold_x", "mu": "mu_photons_per_pulse"}
MAX_GRID = 10**7


def _add_point_flags(p, skip=()):
    if "length" not in skip:
        p.add_argument("--length", type=float, default=0.0, help="channel length, km (default 0)")
    p.add_argument("--alpha", type=float, default=0.21,
                   help="attenuation exponent per km, transmittance 10^(-alpha*length) (default 0.21)")
    if "mu" not in skip:
        p.add_argument("--mu", type=float, default=1.65,
                       help="mean photons per pulse (default 1.65)")
    if "threshold" not in skip:
        p.add_argument("--threshold", type=float, default=0.0,
                       help="normalized decision threshold x (default 0)")
    if "mode" not in skip:
        p.add_argument("--mode", choices=rates.MODES, default=rates.DECOY)
    p.add_argument("--delta-mode", choices=DELTA_MODES, default=WORST_CASE,
                   help="tagged-ratio estimator (default worst-case)")
    p.add_argument("--f-ec", type=float, default=rates.F_EC_DEFAULT,
                   help="error-correction inefficiency (default 1.22)")
    p.add_argument("--clamping", choices=rates.CLAMPINGS, default=rates.PRODUCT)
    p.add_argument("--json", action="store_true", help="emit one JSON object")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdqkd",
        description="Decoy-state BB84 with homodyne detection. Lengths in km, "
                    "intensities in mean photons per pulse, rates in secret bits per pulse.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rate", help="secure rate report for one operating point")
    _add_point_flags(p)

    p = sub.add_parser("sweep", help="CSV table of the rate over a grid")
    p.add_argument("--variable", choices=tuple(SWEEP_UNITS), required=True)
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    _add_point_flags(p)

    p = sub.add_parser("optimize", help="channel window, best threshold or best intensity")
    p.add_argument("target", choices=("window", "threshold", "mu"))
    p.add_argument("--mu-min", type=float, default=0.01)
    p.add_argument("--mu-max", type=float, default=5.0)
    p.add_argument("--ceiling", type=float, default=optimize.L_CEILING,
                   help="longest channel scanned by 'window', km")
    _add_point_flags(p)

    p = sub.add_parser("simulate", help="Monte Carlo session from a key = value config file")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--z-threshold", type=float, default=5.0)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("calibrate", help="estimate mu from a file of detector voltages")
    p.add_argument("samples")
    p.add_argument("--formula", choices=calibration.FORMULA_MODES, default=calibration.DERIVED)
    p.add_argument("--json", action="store_true")
    return parser


def _validate_point(parser, args, skip=()):
    checks = [
        ("alpha", lambda v: v >= 0, "alpha must be non-negative"),
        ("f_ec", lambda v: v >= 1, "f_ec must be >= 1"),
    ]
    if "length" not in skip:
        checks.append(("length", lambda v: v >= 0, "length must be non-negative"))
    if "mu" not in skip:
        checks.append(("mu", lambda v: v > 0, "mu must be positive"))
    if "threshold" not in skip:
        checks.append(("threshold", lambda v: v >= 0, "threshold must be non-negative"))
    for name, ok, msg in checks:
        v = getattr(args, name)
        if not (math.isfinite(v) and ok(v)):
            parser.error(msg)


def _rate_kw(args):
    return {"delta_mode": args.delta_mode, "f_ec": args.f_ec, "clamping": args.clamping}


def _emit(args, payload: dict, out):
    out.write(textio.format_json(payload) if args.json else textio.format_kv(payload))


def cmd_rate(args, out):
    report = rates.rate_at(ChannelParams(args.alpha, args.length), args.mu,
                           DetectionPolicy(args.threshold, args.delta_mode), args.mode,
                           f_ec=args.f_ec, clamping=args.clamping)
    payload = {"length_km": args.length, "alpha": args.alpha, "mu": args.mu,
               "threshold": args.threshold, "delta_mode": args.delta_mode,
               "clamping": args.clamping}
    payload.update(report.as_dict())
    _emit(args, payload, out)


def sweep_grid(start: float, stop: float, step: float) -> np.ndarray:
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def sweep_rows(variable, grid, args):
    fixed = {"length": args.length, "threshold": args.threshold, "mu": args.mu}
    fixed[variable] = grid
    c = rates.rate_components(transmittance(args.alpha, fixed["length"]), fixed["mu"],
                              fixed["threshold"], args.mode, **_rate_kw(args))
    cols = [c["e"], c["a"], c["p_D"], c["delta_ratio"], c["eta1"], c["rate"]]
    return [[float(grid[i])] + [float(np.broadcast_to(col, grid.shape)[i]) for col in cols]
            for i in range(len(grid))]


def cmd_sweep(args, out, parser):
    if not (args.step > 0 and args.start <= args.stop):
        parser.error("sweep needs step > 0 and start <= stop")
    n = math.floor((args.stop - args.start) / args.step + 1e-9) + 1
    if n > MAX_GRID:
        parser.error(f"grid has {n} points, limit is {MAX_GRID}")
    if args.variable == "mu" and args.start <= 0:
        parser.error("mu must be positive")
    if args.variable in ("length", "threshold") and args.start < 0:
        parser.error(f"{args.variable} must be non-negative")
    grid = sweep_grid(args.start, args.stop, args.step)
    rows = sweep_rows(args.variable, grid, args)
    header = [SWEEP_UNITS[args.variable], *SWEEP_COLUMNS]
    if args.json:
        out.write(textio.format_json({"variable": args.variable, "mode": args.mode,
                                      "columns": header, "rows": rows}))
        return
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["%.15g" % v for v in row])
    out.write(buf.getvalue())


def cmd_optimize(args, out):
    kw = _rate_kw(args)
    fixed = {"alpha": args.alpha, "mode": args.mode, "delta_mode": args.delta_mode,
             "f_ec": args.f_ec, "clamping": args.clamping}
    if args.target == "window":
        w = optimize.channel_window(args.threshold, args.mu, args.alpha, args.mode,
                                    ceiling=args.ceiling, **kw)
        payload = {"target": "window", "threshold": args.threshold, "mu": args.mu, **fixed,
                   "l_min_km": w.l_min, "l_opt_km": w.l_opt, "l_max_km": w.l_max,
                   "rate_at_l_opt": w.r_opt}
    elif args.target == "threshold":
        o = optimize.optimal_threshold(args.length, args.mu, args.alpha, args.mode, **kw)
        payload = {"target": "threshold", "length_km": args.length, "mu": args.mu, **fixed,
                   "x_opt": o.argmax, "rate": o.value, "method": o.method}
    else:
        o = optimize.optimal_mu(args.length, args.threshold, args.alpha,
                                (args.mu_min, args.mu_max), args.mode, **kw)
        payload = {"target": "mu", "length_km": args.length, "threshold": args.threshold,
                   **fixed, "mu_min": args.mu_min, "mu_max": args.mu_max,
                   "mu_opt": o.argmax, "rate": o.value, "method": o.method,
                   "at_boundary": o.at_boundary}
    _emit(args, payload, out)


def cmd_simulate(args, out):
    config = textio.load_config(args.config)
    stats = sim.run_session(config, workers=max(args.workers, 1))
    payload = {"config": textio.config_dict(config), "stats": stats.as_dict()}
    try:
        test = sim.decoy_test(stats, config, args.z_threshold)
        payload["decoy_test"] = {"verdict": test.verdict, **{f"z.{k}": v for k, v in test.z_scores.items()}}
    except sim.InsufficientStatistics as exc:
        payload["decoy_test"] = {"verdict": "insufficient-statistics", "detail": str(exc)}
    est = sim.simulate_rate(config, stats)
    analytic = sim.analytic_rates(config)
    payload["rate"] = {
        "empirical.signal": est.signal_rate, "empirical.signal_sd": est.signal_sd,
        "empirical.decoy": est.decoy_rate, "empirical.decoy_sd": est.decoy_sd,
        "empirical.combined": est.rate, "empirical.combined_sd": est.sd,
        "degenerate": est.degenerate,
        "analytic.signal": analytic["signal"], "analytic.decoy": analytic["decoy"],
        "analytic.combined": analytic["combined"],
    }
    _emit(args, payload, out)


def cmd_calibrate(args, out):
    try:
        samples = calibration.read_samples(args.samples)
    except (OSError, ValueError) as exc:
        raise textio.ConfigError(str(exc)) from None
    rec = calibration.estimate_mu(samples, args.formula)
    _emit(args, rec.as_dict(), out)


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command in ("rate", "sweep", "optimize"):
            skip = (args.variable,) if args.command == "sweep" else ()
            _validate_point(parser, args, skip)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        if args.command == "rate":
            cmd_rate(args, out)
        elif args.command == "sweep":
            cmd_sweep(args, out, parser)
        elif args.command == "optimize":
            cmd_optimize(args, out)
        elif args.command == "simulate":
            cmd_simulate(args, out)
        else:
            cmd_calibrate(args, out)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    except textio.ConfigError as exc:
        print(f"hdqkd: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"hdqkd: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

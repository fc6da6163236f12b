"""Command-line entry point: ``gevnodal <subcommand>``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bounds as B
from .certify import Segment, LineSeries, certify_zero_bound, write_certificates_csv
from .coeffs import GevreyParams, read_bundle, synth_coefficients, write_bundle, zero_coefficients
from .errors import ConfigError
from .experiment import (
    ExperimentConfig,
    auto_dt,
    fit_scaling,
    make_u0,
    run_sweep,
    verify_suite,
    write_json,
    write_sweep,
)
from .fourier import read_snapshot, write_snapshot
from .nodal import make_probe_set, max_line_intersections, nodal_length_2d, write_nodal_csv, \
    write_polyline, zeros_1d
from .solver import SolverConfig, solve, write_diagnostics_csv


def _floats(s: str) -> list[float]:
    return [float(x) for x in s.split(",") if x.strip()]


def _config(args) -> ExperimentConfig:
    kw = {}
    if args.config:
        cfg = ExperimentConfig.from_text(Path(args.config).read_text())
        kw = {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg)}
    for item in args.set or []:
        k, _, v = item.partition("=")
        kw[k.strip()] = v.strip()
    return ExperimentConfig.from_strings({k: v for k, v in kw.items()})


def cmd_synth(args) -> int:
    params = GevreyParams(args.beta, args.delta)
    if args.zero:
        cs = zero_coefficients(args.dim, params)
    else:
        cs = synth_coefficients(args.seed, args.dim, args.J, params, args.margin, args.amplitude)
    write_bundle(args.out, cs)
    print(f"M0={cs.M0:.6g} M1={cs.M1:.6g} Kv={cs.Kv:.6g} Kw={cs.Kw:.6g} -> {args.out}")
    return 0


def cmd_solve(args) -> int:
    cs = read_bundle(args.coeffs) if args.coeffs else zero_coefficients(args.dim)
    if args.u0_file:
        u0, _ = read_snapshot(args.u0_file)
    else:
        u0 = make_u0(ExperimentConfig(seed=args.seed, dim=cs.dim, J=args.J, u0=args.u0))
    times = _floats(args.times)
    dt = args.dt if args.dt > 0 else auto_dt(cs, u0.J)
    radii = [(args.delta, args.beta)] if args.delta > 0 else []
    rec = solve(u0, cs, SolverConfig(dt, times[-1], tuple(times), None, tuple(radii)))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_diagnostics_csv(out / "diagnostics.csv", rec)
    for k, s in enumerate(rec.snapshots):
        write_snapshot(out / f"u_{k:03d}.txt", s.u, s.t)
    print(f"q0={rec.q0:.6g}; {len(rec.snapshots)} snapshots -> {out}")
    return 0


def cmd_measure(args) -> int:
    rows = []
    for path in args.fields:
        u, t = read_snapshot(path)
        if u.dim == 1:
            z = zeros_1d(u, args.oversample)
            z2 = zeros_1d(u, 2 * args.oversample)
            rows.append({"t": t, "method": "zero_count", "resolution": args.oversample * u.J,
                         "value": float(z.count), "refined_value": float(z2.count),
                         "n_line_max": z.count})
        else:
            curve = nodal_length_2d(u, max(args.resolution, 4 * u.J))
            probes = make_probe_set((math.pi, math.pi), args.r)
            rows.append({"t": t, "method": "contour_length", "resolution": curve.N,
                         "value": curve.total_length, "refined_value": curve.refined_length,
                         "n_line_max": max_line_intersections(curve, probes, args.angles)})
            if args.polyline:
                write_polyline(Path(args.polyline).with_suffix(f".{len(rows) - 1}.csv"), curve)
    write_nodal_csv(args.out, rows)
    for r in rows:
        print(f"t={r['t']:.6g} {r['method']}={r['value']:.6g}")
    return 0


def cmd_certify(args) -> int:
    u, _ = read_snapshot(args.field)
    p = _floats(args.p)
    rows = []
    for th in _floats(args.theta):
        if u.dim == 1:
            series, seg = LineSeries.from_field(u), Segment(p[0], min(2 * args.r, math.pi))
        else:
            series, seg = LineSeries.from_line(u, p, th), Segment(0.0, min(2 * args.r, math.pi))
        cert = certify_zero_bound(series, seg, args.nmax)
        rows.append((p, th, args.r, cert))
        print(f"theta={th:.6g}: " + (f"fewer than {cert.nstar} zeros" if cert else "inconclusive"))
    write_certificates_csv(args.out, rows)
    return 0


def cmd_bound(args) -> int:
    bc = B.BoundConstants(q0=args.q0, M0=args.M0, M1=args.M1, Kv=args.Kv, Kw=args.Kw,
                          delta=args.delta, beta=args.beta, K=args.K, C0=args.C0, C3=args.C3)
    t = _floats(args.t) if args.t else list(np.geomspace(1e-3, math.exp(-1), 30))
    M = args.M if args.M > 0 else B.bisect_M_star(bc, t, args.dim)
    rep = B.bound_report(bc.with_(M=M), t, args.dim)
    rep["M_star_bisected"] = args.M <= 0
    B.write_report(args.out, rep)
    print(f"M={M:.6g} -> {args.out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if args.out:
        cfg = dataclasses.replace(cfg, output_dir=args.out)
    res = run_sweep(cfg)
    out = write_sweep(res)
    print(f"config {res.config_hash[:12]}: Cmain={res.calibration.C:.6g} "
          f"dominance={'ok' if res.dominance_holds else res.dominance_violations} -> {out}")
    return 0 if res.dominance_holds and res.hard_invariants_hold else 1


def cmd_fit(args) -> int:
    with open(args.input) as fh:
        rows = list(csv.DictReader(fh))
    t = [float(r["t"]) for r in rows]
    y = [float(r[args.column]) for r in rows]
    fr = fit_scaling((t, y), args.column, with_log=not args.no_log)
    out = dataclasses.asdict(fr)
    print(json.dumps(out, sort_keys=True))
    if args.out:
        write_json(args.out, out)
    return 0


def cmd_verify(args) -> int:
    rep = verify_suite(_config(args))
    for name, item in rep["items"].items():
        print(f"{'PASS' if item['passed'] else 'FAIL'} {name}")
    if args.out:
        write_json(args.out, rep)
    return 0 if rep["all_passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gevnodal", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("synth", help="synthesize a Gevrey coefficient bundle")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--dim", type=int, default=1)
    s.add_argument("--J", type=int, default=8)
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--delta", type=float, default=0.1)
    s.add_argument("--margin", type=float, default=2.0)
    s.add_argument("--amplitude", type=float, default=0.2)
    s.add_argument("--zero", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_synth)

    s = sub.add_parser("solve", help="integrate to snapshot times")
    s.add_argument("--coeffs", help="bundle directory (default: v = w = 0)")
    s.add_argument("--dim", type=int, default=1)
    s.add_argument("--u0", default="flat", help="initial-data recipe")
    s.add_argument("--u0-file")
    s.add_argument("--J", type=int, default=64)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--dt", type=float, default=0.0)
    s.add_argument("--times", required=True, help="comma-separated snapshot times")
    s.add_argument("--delta", type=float, default=0.1)
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_solve)

    s = sub.add_parser("measure", help="nodal measure of snapshot files")
    s.add_argument("fields", nargs="+")
    s.add_argument("--oversample", type=int, default=16)
    s.add_argument("--resolution", type=int, default=256)
    s.add_argument("--angles", type=int, default=64)
    s.add_argument("--r", type=float, default=0.5)
    s.add_argument("--polyline")
    s.add_argument("--out", default="nodal.csv")
    s.set_defaults(fn=cmd_measure)

    s = sub.add_parser("certify", help="certified zero-count bounds on a segment or chord")
    s.add_argument("field")
    s.add_argument("--p", required=True, help="x or x,y")
    s.add_argument("--theta", default="0")
    s.add_argument("--r", type=float, default=0.25)
    s.add_argument("--nmax", type=int, default=200)
    s.add_argument("--out", default="certificates.csv")
    s.set_defaults(fn=cmd_certify)

    s = sub.add_parser("bound", help="evaluate the bound chain")
    for name, default in (("q0", 10.0), ("M0", 1.0), ("M1", 1.0), ("Kv", 1.0), ("Kw", 1.0),
                          ("delta", 0.1), ("beta", 1.0), ("K", 1.0), ("M", 0.0),
                          ("C0", math.e), ("C3", 0.36)):
        s.add_argument(f"--{name}", type=float, default=default)
    s.add_argument("--dim", type=int, default=1)
    s.add_argument("--t", help="comma-separated times (default: 30-point log grid)")
    s.add_argument("--out", default="bounds.json")
    s.set_defaults(fn=cmd_bound)

    for name, fn, hlp in (("sweep", cmd_sweep, "full experiment over a t grid"),
                          ("verify", cmd_verify, "run the verification suite")):
        s = sub.add_parser(name, help=hlp)
        s.add_argument("--config", help="key=value config file")
        s.add_argument("--set", action="append", metavar="KEY=VALUE")
        s.add_argument("--out")
        s.set_defaults(fn=fn)

    s = sub.add_parser("fit", help="log-power-law fit of a CSV column against t")
    s.add_argument("input")
    s.add_argument("--column", default="value")
    s.add_argument("--no-log", action="store_true")
    s.add_argument("--out")
    s.set_defaults(fn=cmd_fit)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``kaclab <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import harness
from .coeffs import RngStream, parse_law, stream_index_for
from .gaf import gaf_zeros, intensity1, intensity_integral, sample_gaf
from .polyroots import Polynomial, aberth_roots, validate_roots


def _cmd_roots(args) -> int:
    law = parse_law(args.law)
    cell_id = f"roots|{law.name}|n={args.degree}"
    rows = []
    for t in range(args.trials):
        stream = RngStream(args.seed, stream_index_for(cell_id, t))
        c = law.draw(stream.generator, args.degree + 1)
        while c[-1] == 0:
            c = law.draw(stream.generator, args.degree + 1)
        p = Polynomial(c)
        rep = aberth_roots(p, seed=int(stream.generator.integers(0, 2**63)))
        if not rep.converged:
            logging.warning("trial %d did not converge", t)
        res = validate_roots(p, rep.roots).residuals
        rows.extend((t, z.real, z.imag, r) for z, r in zip(rep.roots, res))
    harness.write_csv(args.out, ("trial", "root_re", "root_im", "residual"), rows,
                      {"law": law.name, "degree": args.degree, "seed": args.seed})
    return 0


def _cmd_gaf(args) -> int:
    cell_id = f"cli-gaf|R={args.window!r}|tol={args.tol!r}"
    rows = []
    R_max = args.window + 1.0
    for t in range(args.trials):
        sample = sample_gaf(RngStream(args.seed, stream_index_for(cell_id, t)), R_max, args.tol)
        cfg = gaf_zeros(sample, R_max)
        rows.extend((t, z.real, z.imag) for z in cfg.points if abs(z) <= args.window)
    harness.write_csv(args.out, ("trial", "z_re", "z_im"), rows,
                      {"window": args.window, "tol": args.tol, "seed": args.seed})
    return 0


def _cmd_intensity(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    x = np.linspace(-args.xmax, args.xmax, args.points)
    harness.write_csv(out / "rho1.csv", ("x", "rho1"), zip(x, intensity1(x)))
    radii = np.linspace(0.0, args.rmax, args.radii)[1:]
    harness.write_csv(out / "expected_count.csv", ("R", "expected_count"),
                      ((r, intensity_integral(float(r))) for r in radii))
    return 0


def _cmd_experiment(args) -> int:
    text = Path(args.config).read_text(encoding="utf-8") if args.config else "{}"
    cfg = harness.parse_config(text)
    if args.workers:
        cfg.workers = args.workers
    res = harness.run_experiment(cfg, args.out)
    _print_rows(res.rows)
    return 0


def _cmd_report(args) -> int:
    src = Path(args.input)
    corr = harness.read_correlations(src / "correlations.csv")
    rows, pairs = harness.rows_from_correlations(corr)
    manifest = None
    mpath = src / "manifest.json"
    if mpath.exists():
        import json

        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    harness.emit_report(rows, args.out or src, pairs=pairs, manifest=manifest)
    _print_rows(rows)
    return 0


def _cmd_bounds(args) -> int:
    law = parse_law(args.law)
    for R in args.radii:
        mean, se = harness.max_modulus_stat(law, args.degree, R, args.trials, args.seed)
        print(f"max-modulus R={R:g}: mean={mean:.6f} se={se:.2g} bound=e^R={math.exp(R):.6f}")
    return 0


def _print_rows(rows) -> None:
    print(f"{'law':<18}{'n':>6}  {'phi_id':<10}{'mean':>12}{'stderr':>11}{'gap_sigma':>11}  status")
    for r in rows:
        print(f"{r.law:<18}{str(r.n):>6}  {r.phi_id:<10}{r.mean:>12.5g}{r.stderr:>11.3g}{r.gap_sigma:>11.3g}  {r.status}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kaclab", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("roots", help="roots of random Kac polynomials")
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--law", default="gaussian-complex")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_roots)

    p = sub.add_parser("gaf", help="zeros of sampled limiting GAFs")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--window", type=float, default=4.0)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gaf)

    p = sub.add_parser("intensity", help="first intensity and expected disk counts")
    p.add_argument("--out", required=True)
    p.add_argument("--xmax", type=float, default=6.0)
    p.add_argument("--points", type=int, default=241)
    p.add_argument("--rmax", type=float, default=6.0)
    p.add_argument("--radii", type=int, default=61)
    p.set_defaults(func=_cmd_intensity)

    p = sub.add_parser("experiment", help="run a universality experiment")
    p.add_argument("--config", help="JSON config file (defaults when omitted)")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=0, help=f"worker processes; {harness.WORKERS_ENV} overrides")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("report", help="rebuild the gap table and plot data from an experiment directory")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", help="output directory (defaults to --in)")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("bounds", help="max-modulus bound check")
    p.add_argument("--law", default="gaussian-real")
    p.add_argument("--degree", type=int, default=256)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--radii", type=float, nargs="+", default=[1.0, 2.0])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_bounds)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"kaclab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: ``nmkrotov {run,bloch,fit,oracle}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import csvio
from .bath import BathParams, default_fit_window, fit_exponential_series, sample_correlation
from .experiment import (ExperimentConfig, bloch_trajectory, parse_settings,
                         read_config_file, run_experiment)
from .liouville import ControlPulse

# flag -> config key; values are passed through parse_settings
_RUN_FLAGS = [
    ("--gate", str, "z or identity"),
    ("--alpha", str, "damping constant"),
    ("--temperature", str, "k_B T in units of Omega"),
    ("--cutoff", str, "bath cutoff frequency in units of Omega"),
    ("--tf", str, "gate time in units of 1/Omega"),
    ("--dt", str, "time step (default min(1e-3, tf/1000))"),
    ("--lambda", str, "Krotov penalty weight"),
    ("--max-iter", str, "maximum Krotov iterations"),
    ("--error-threshold", str, "stop once the gate error is below this"),
    ("--max-amplitude", str, "bound on |epsilon|"),
    ("--initial", str, "constant initial pulse value (default max_amplitude/2)"),
    ("--initial-pulse", str, "initial pulse CSV file"),
    ("--ref-mode", str, "previous or fixed reference pulse in the penalty"),
    ("--max-terms", str, "maximum exponential terms in the CF fit"),
    ("--sweep", str, "axis=v1,v2,... with axis in tf, cutoff, alpha, temperature"),
    ("--out", str, "output directory"),
    ("--workers", str, "parallel worker processes for sweeps"),
]


def _add_bath_flags(p):
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--cutoff", type=float, default=1.0)
    p.add_argument("--max-terms", type=int, default=4)
    p.add_argument("--ideal", action="store_true", help="no bath (closed qubit)")


def make_parser():
    parser = argparse.ArgumentParser(prog="nmkrotov", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="optimize a gate, optionally over a parameter sweep")
    run.add_argument("--config", type=Path, help="file of 'key = value' lines")
    for flag, kind, help_ in _RUN_FLAGS:
        run.add_argument(flag, type=kind, help=help_)
    run.add_argument("--ideal", action="store_true", default=None, help="no bath (closed qubit)")

    bloch = sub.add_parser("bloch", help="Bloch-vector trajectory of a stored pulse")
    bloch.add_argument("pulse", type=Path)
    bloch.add_argument("--p0", default="1,0,0", help="initial polarization px,py,pz")
    bloch.add_argument("--out", type=Path, default=Path("bloch.csv"))
    _add_bath_flags(bloch)

    fit = sub.add_parser("fit", help="sample and fit the bath correlation function")
    fit.add_argument("--tf", type=float, default=1.0)
    fit.add_argument("--samples", type=int, default=2001)
    fit.add_argument("--target", type=float, default=1e-7)
    fit.add_argument("--out", type=Path, default=Path("."))
    _add_bath_flags(fit)

    orc = sub.add_parser("oracle", help="integrate the memory-kernel equation directly")
    orc.add_argument("--pulse", type=Path, help="pulse CSV (default: zero pulse)")
    orc.add_argument("--tf", type=float, default=2.0)
    orc.add_argument("--dt", type=float, default=5e-4)
    orc.add_argument("--p0", default="0,0,1")
    orc.add_argument("--out", type=Path, default=Path("rho.csv"))
    _add_bath_flags(orc)
    return parser


def _vector(text):
    vals = [float(v) for v in text.split(",")]
    if len(vals) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated numbers")
    return np.array(vals)


def _bath(args):
    return None if args.ideal else BathParams(args.alpha, args.cutoff, args.temperature)


def cmd_run(args):
    settings = read_config_file(args.config) if args.config else {}
    pairs = []
    for flag, _, _ in _RUN_FLAGS:
        key = flag.lstrip("-").replace("-", "_")
        value = getattr(args, key)
        if value is not None:
            pairs.append((key, value))
    settings.update(parse_settings(pairs))
    if args.ideal:
        settings["ideal"] = True
    cfg = ExperimentConfig(**settings)
    rows = run_experiment(cfg)
    for r in rows:
        print(f"{r['point_value']:.6g}\terror={r['final_error']:.3e}\t"
              f"iterations={r['iterations']}\t{r['status']}")
    return 1 if any(r["status"].startswith("error") for r in rows) else 0


def cmd_bloch(args):
    bloch_trajectory(args.pulse, _vector(args.p0), _bath(args), out_file=args.out,
                     max_terms=args.max_terms)
    print(args.out)
    return 0


def cmd_fit(args):
    bath = BathParams(args.alpha, args.cutoff, args.temperature)
    samples = sample_correlation(bath, default_fit_window(args.tf, bath), args.samples)
    series = fit_exponential_series(samples, args.max_terms, args.target)
    csvio.write_samples(args.out / "cf_samples.csv", samples)
    csvio.write_series(args.out / "cf_series.csv", series)
    rel = series.fit_residual / abs(samples[0].value)
    print(f"{len(series)} terms, residual {series.fit_residual:.3e} "
          f"(relative {rel:.3e}), converged={series.converged}")
    return 0


def cmd_oracle(args):
    from .oracle import propagate_nonlocal
    from .liouville import SIGMA_X, SIGMA_Y, SIGMA_Z

    if args.pulse:
        pulse = csvio.read_pulse(args.pulse)
    else:
        pulse = ControlPulse.constant(0.0, args.tf, args.dt)
    p0 = _vector(args.p0)
    rho0 = 0.5 * (np.eye(2) + p0[0] * SIGMA_X + p0[1] * SIGMA_Y + p0[2] * SIGMA_Z)
    bath = BathParams(0.0 if args.ideal else args.alpha, args.cutoff, args.temperature)
    rhos = propagate_nonlocal(rho0, pulse, bath)
    csvio.write_density_trajectory(args.out, pulse.grid, rhos)
    print(args.out)
    return 0


def main(argv=None):
    args = make_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "bloch": cmd_bloch, "fit": cmd_fit, "oracle": cmd_oracle}
    try:
        return handler[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"nmkrotov: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

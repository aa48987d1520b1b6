"""Command-line interface.

Subcommands ``fit``, ``track``, ``cusum``, ``simulate`` and ``calibrate``.
Settings may come from a YAML file (``--config``); flags override the file.
Relative output paths are resolved against ``--out-dir``, which defaults to
``$LEARNCURVE_OUT_DIR`` or the working directory.

Exit codes: 0 success, 1 numerical failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .cpm import CpmConfig, aci_linear
from .errors import DomainError, InsufficientDataError, NumericalError
from .io import ParseError, ingest_cases, write_json, write_table
from .lccusum import run_lc_cusum
from .model import WeibullRegParams, cases_to_arrays, rmot
from .sim import (
    Detector,
    ScenarioSpec,
    calibrate_from_paths,
    detector_paths,
    make_sampler,
    oc_from_paths,
)
from .slca import run_slca
from .wee import fit_wee

log = logging.getLogger("learncurve")

OUT_DIR_ENV = "LEARNCURVE_OUT_DIR"
EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# -- parser --------------------------------------------------------------


def _floats(text):
    return [float(v) for v in str(text).replace(",", " ").split()]


def _ints(text):
    return [int(v) for v in str(text).replace(",", " ").split()]


def _add_common(p):
    p.add_argument("--config", help="YAML file of option values (flags take precedence)")
    p.add_argument("--out-dir", help=f"directory for relative output paths (default ${OUT_DIR_ENV} or .)")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_standard(p):
    g = p.add_argument_group("standard model")
    g.add_argument("--standard-gamma", type=float)
    g.add_argument("--standard-eta", type=float)
    g.add_argument("--standard-beta", type=_floats, help="comma-separated coefficients")
    g.add_argument("--standard-data", help="CSV of standard-cohort cases, fitted without weighting")


def _add_cpm(p):
    g = p.add_argument_group("comparative probability metric")
    g.add_argument("--kind", choices=["PA", "PN", "custom"], default="PN")
    g.add_argument("--epsilon", type=float, default=0.2)
    g.add_argument("--delta-l", type=float)
    g.add_argument("--delta-u", type=float)
    g.add_argument("--cutoff", type=float, default=0.95)
    g.add_argument("--alpha", type=float, default=0.05)


def _add_scenario(p):
    g = p.add_argument_group("scenario")
    g.add_argument("--detector", choices=[d.value for d in Detector], default="SLCA")
    g.add_argument("--reps", type=int, default=2000)
    g.add_argument("--seed", type=int, default=2024)
    g.add_argument("--t", type=int, default=100, help="horizon")
    g.add_argument("--change-index", type=int, default=30)
    g.add_argument("--lam", type=float, default=0.05)
    g.add_argument("--epsilon", type=float, default=0.2)
    g.add_argument("--x-eval", type=_floats, default=[27.0])
    g.add_argument("--n0", type=int, default=5, help="SLCA warm-up inside the simulation")
    g.add_argument("--sampler", choices=["quantile", "uniform", "empirical"], default="quantile")
    g.add_argument("--bmi-file", help="one covariate value per line, for --sampler empirical")
    g.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="learncurve", description="Learning-curve monitoring for operative times.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="WEE fit with sandwich standard errors (JSON)")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--lam", type=float, default=0.05)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", default="fit.json")

    p = sub.add_parser("track", help="sequential RMOT / relative risk / CPM series (CSV, optional SVG)")
    _add_common(p)
    p.add_argument("--data", required=True)
    _add_standard(p)
    _add_cpm(p)
    p.add_argument("--lam", type=float, default=0.05)
    p.add_argument("--x-eval", type=_floats, required=False)
    p.add_argument("--n0", type=int, default=10)
    p.add_argument("--persistence", type=int, default=1)
    p.add_argument("--out", default="track.csv")
    p.add_argument("--svg")

    p = sub.add_parser("cusum", help="LC-CUSUM trace (CSV, optional SVG)")
    _add_common(p)
    p.add_argument("--data", required=True)
    _add_standard(p)
    p.add_argument("--epsilon", type=float, default=0.2)
    p.add_argument("--h", type=float, required=False)
    p.add_argument("--x-eval", type=_floats, required=False)
    p.add_argument("--out", default="cusum.csv")
    p.add_argument("--svg")

    p = sub.add_parser("simulate", help="PFA/PSD of a detector at a given cutoff (JSON)")
    _add_common(p)
    _add_scenario(p)
    p.add_argument("--h", type=float, required=False)
    p.add_argument("--windows", type=_ints, default=[20, 50, 70])
    p.add_argument(
        "--psd-conditional",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="drop runs with a signal before the change point from the PSD denominator",
    )
    p.add_argument("--out", default="simulate.json")

    p = sub.add_parser("calibrate", help="bisect the cutoff to a target PFA range (JSON)")
    _add_common(p)
    _add_scenario(p)
    p.add_argument("--target", type=_floats, default=[0.03, 0.07])
    p.add_argument("--bounds", type=_floats)
    p.add_argument("--out", default="calibrate.json")
    return parser


def _apply_config(parser, argv):
    """Load ``--config`` (if any) into subcommand defaults, then parse the flags."""
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in COMMANDS), None)
    if known.config and command:
        try:
            data = yaml.safe_load(Path(known.config).read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise UsageError(f"cannot read config {known.config}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must be a flat key/value mapping")
        sub = parser._subparsers._group_actions[0].choices[command]
        actions = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, val in data.items():
            dest = str(key).replace("-", "_")
            if dest not in actions or dest in ("config", "help"):
                raise UsageError(f"unknown config key {key!r} for '{command}'")
            action = actions[dest]
            if isinstance(val, list):
                val = " ".join(str(v) for v in val)
            if action.type is not None and val is not None and not isinstance(val, bool):
                val = action.type(str(val))
            defaults[dest] = val
            action.required = False
        sub.set_defaults(**defaults)
    return parser.parse_args(argv)


# -- helpers -------------------------------------------------------------


def _out_path(args, name) -> Path:
    p = Path(name)
    if not p.is_absolute():
        base = args.out_dir or os.environ.get(OUT_DIR_ENV) or "."
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _check_lambda(lam):
    if not (0.0 < lam <= 1.0):
        raise UsageError(f"lambda must satisfy 0 < lambda <= 1 (the weight formula is undefined otherwise), got {lam}")


def _standard(args, d):
    """Known standard parameters or an unweighted fit to a standard cohort."""
    literal = [args.standard_gamma, args.standard_eta]
    if args.standard_data:
        if any(v is not None for v in literal):
            raise UsageError("give either --standard-data or literal standard parameters, not both")
        cases = ingest_cases(args.standard_data)
        y, X = cases_to_arrays(cases)
        fit = fit_wee((y, X), 1.0, w=np.ones(len(y)))
        if not fit.converged:
            raise NumericalError("standard-cohort fit did not converge")
        if fit.params.d != d:
            raise UsageError(f"standard cohort has {fit.params.d} covariates, data has {d}")
        return fit
    if any(v is None for v in literal):
        raise UsageError("a standard model is required: --standard-gamma/--standard-eta[/--standard-beta] or --standard-data")
    beta = tuple(args.standard_beta or ())
    std = WeibullRegParams(args.standard_gamma, args.standard_eta, beta)
    if std.d != d:
        raise UsageError(f"standard model has {std.d} coefficients, data has {d} covariates")
    return std


def _x_eval(args, d):
    x = args.x_eval if args.x_eval is not None else []
    if len(x) != d:
        raise UsageError(f"--x-eval needs {d} value(s), got {len(x)}")
    return tuple(x)


def _cpm_config(args) -> CpmConfig:
    return CpmConfig.from_kind(
        args.kind, args.epsilon, delta_l=args.delta_l, delta_u=args.delta_u, cutoff=args.cutoff, alpha=args.alpha
    )


# -- commands ------------------------------------------------------------


def cmd_fit(args) -> int:
    _check_lambda(args.lam)
    if not (0.0 < args.alpha < 1.0):
        raise UsageError("alpha must lie in (0, 1)")
    cases = ingest_cases(args.data)
    fit = fit_wee(cases, args.lam)
    names = ["gamma", "eta"] + [f"beta{j + 1}" for j in range(fit.params.d)]
    rows = []
    for name, est, se in zip(names, fit.params.to_vector(), fit.ase):
        iv = aci_linear(est, se, args.alpha)
        rows.append({"name": name, "estimate": est, "ase": se, "aci": [iv.lower, iv.upper]})
    doc = {
        "n_cases": fit.n_cases,
        "lambda": fit.lam,
        "aci_level": 1.0 - args.alpha,
        "parameters": rows,
        "covariance": fit.sigma,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "score_norm": fit.score_norm,
        "loglik": fit.loglik,
        "message": fit.message,
    }
    out = _out_path(args, args.out)
    write_json(out, doc)
    print(f"wrote {out}")
    if not fit.converged:
        print(f"fit did not converge: {fit.message}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_track(args) -> int:
    _check_lambda(args.lam)
    cases = ingest_cases(args.data)
    d = len(cases[0].x)
    std = _standard(args, d)
    cfg = _cpm_config(args)
    x = _x_eval(args, d)
    if args.persistence < 1:
        raise UsageError("persistence must be at least 1")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        series = run_slca(cases, std, args.lam, cfg, x, n0=args.n0, persistence=args.persistence)
    rows = []
    for p in series.points:
        if p.fit_ok:
            rows.append(
                [p.index, p.mu.point, p.mu.lower, p.mu.upper, p.r.point, p.r.lower, p.r.upper,
                 p.cpm.point, p.cpm.lower, p.cpm.upper, True]
            )
        else:
            rows.append([p.index] + [None] * 9 + [False])
    out = _out_path(args, args.out)
    header = ["i", "mu", "mu_lo", "mu_hi", "r", "r_lo", "r_hi", "cpm", "cpm_lo", "cpm_hi", "fit_ok"]
    write_table(out, header, rows)
    print(f"wrote {out}")
    if args.svg:
        from .plotting import plot_track

        std_params = std.params if hasattr(std, "params") else std
        svg = _out_path(args, args.svg)
        plot_track(series, rmot(std_params, x), svg)
        print(f"wrote {svg}")
    if series.expertise_time is not None:
        print(f"expertise time: case {series.expertise_time}")
    else:
        print("expertise time: not reached")
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return EXIT_NUMERICAL if series.warning else EXIT_OK


def cmd_cusum(args) -> int:
    if args.h is None:
        raise UsageError("--h is required")
    cases = ingest_cases(args.data)
    d = len(cases[0].x)
    std = _standard(args, d)
    std = std.params if hasattr(std, "params") else std
    x = _x_eval(args, d)
    trace = run_lc_cusum(cases, std, args.epsilon, args.h, x)
    idx = [c.index for c in cases]
    sig = trace.signal_index
    rows = [[i, v, s, sig is not None and i >= sig] for i, v, s in zip(idx, trace.v, trace.s[1:])]
    out = _out_path(args, args.out)
    write_table(out, ["i", "v", "s", "signaled"], rows)
    print(f"wrote {out}")
    if args.svg:
        from .plotting import plot_cusum

        svg = _out_path(args, args.svg)
        plot_cusum(trace, idx, svg)
        print(f"wrote {svg}")
    print(f"signal at case {sig}" if sig is not None else "no signal")
    return EXIT_OK


def _scenario(args) -> ScenarioSpec:
    _check_lambda(args.lam)
    if args.reps < 1:
        raise UsageError("reps must be at least 1")
    if args.workers < 1:
        raise UsageError("workers must be at least 1")
    values = None
    if args.sampler == "empirical":
        if not args.bmi_file:
            raise UsageError("--sampler empirical needs --bmi-file")
        values = np.loadtxt(args.bmi_file, dtype=float, ndmin=1)
    spec = ScenarioSpec(
        t=args.t,
        covariate_sampler=make_sampler(args.sampler, values),
        x_eval=tuple(args.x_eval),
        lam=args.lam,
        epsilon=args.epsilon,
        change_index=args.change_index,
        n0=args.n0,
    )
    if len(spec.x_eval) != spec.standard.d:
        raise UsageError(f"--x-eval needs {spec.standard.d} value(s)")
    if not (0 < spec.change_index < spec.t):
        raise UsageError("change index must lie inside the horizon")
    return spec


def _scenario_doc(args, spec):
    return {
        "detector": args.detector,
        "seed": args.seed,
        "reps": args.reps,
        "t": spec.t,
        "change_index": spec.change_index,
        "lambda": spec.lam if args.detector == "SLCA" else None,
        "epsilon": spec.epsilon,
        "x_eval": list(spec.x_eval),
        "n0": spec.n0 if args.detector == "SLCA" else None,
        "covariate_sampler": spec.covariate_sampler.describe(),
    }


def cmd_simulate(args) -> int:
    spec = _scenario(args)
    if args.h is None:
        raise UsageError("--h is required")
    if any(w < 0 or spec.change_index + w > spec.t for w in args.windows):
        raise UsageError("windows must be nonnegative and end within the horizon")
    inad = detector_paths(args.detector, spec, "inadequate", args.reps, args.seed, args.workers)
    learn = detector_paths(args.detector, spec, "learning", args.reps, args.seed, args.workers)
    oc = oc_from_paths(args.detector, args.h, inad, learn, spec.change_index, tuple(args.windows), args.psd_conditional)
    doc = {"scenario": _scenario_doc(args, spec), **oc.to_dict()}
    out = _out_path(args, args.out)
    write_json(out, doc)
    psd = ", ".join(f"PSD{k}={v.p:.3f}" for k, v in oc.psd.items())
    print(f"{args.detector} h={args.h:g}: PFA={oc.pfa.p:.3f}, {psd}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    spec = _scenario(args)
    if len(args.target) != 2:
        raise UsageError("--target needs two values")
    bounds = tuple(args.bounds) if args.bounds else None
    paths = detector_paths(args.detector, spec, "inadequate", args.reps, args.seed, args.workers)
    cal = calibrate_from_paths(args.detector, paths, tuple(args.target), bounds)
    doc = {"scenario": _scenario_doc(args, spec), "target": list(args.target), **cal.to_dict()}
    out = _out_path(args, args.out)
    write_json(out, doc)
    print(f"{args.detector}: h={cal.h:.6g}, PFA={cal.pfa.p:.3f}")
    print(f"wrote {out}")
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit,
    "track": cmd_track,
    "cusum": cmd_cusum,
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ParseError, InsufficientDataError, DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

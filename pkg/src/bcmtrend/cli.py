"""Command-line interface: ``bcmtrend simulate | curve | target-info | fit``."""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import harness
from .blinded import BlindedMethod, blinded_fisher, fit_blinded_mixture, fit_blinded_lumping
from .constant import fit_const_blinded, fit_const_unblinded, info_const_blinded
from .core import AllocationWeights
from .errors import DomainError, NumericalError, ValidationError
from .monitoring import Procedure, target_information
from .trend import fit_trend

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _effect(args) -> float:
    if args.beta_h1 is not None and args.rate_ratio is not None:
        raise ValidationError("give either --beta-h1 or --rate-ratio", field="beta_h1")
    if args.rate_ratio is not None:
        if not args.rate_ratio > 0:
            raise ValidationError("must be positive", field="rate_ratio")
        return math.log(args.rate_ratio)
    if args.beta_h1 is None:
        raise ValidationError("--beta-h1 or --rate-ratio is required", field="beta_h1")
    return args.beta_h1


def _dump(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def cmd_simulate(args) -> int:
    scenarios = harness.load_config(args.config)
    if args.procedures:
        procs = [Procedure.parse(p) for p in args.procedures.split(",")]
        scenarios = [
            harness.Scenario(sc.design, sc.true_params,
                             type(sc.spec)(p, sc.spec.beta_h1, sc.spec.alpha, sc.spec.target_info),
                             sc.replications, sc.seed, f"{sc.label}_{p.value}")
            for sc in scenarios for p in procs
        ]
    if args.replications:
        scenarios = [harness.Scenario(sc.design, sc.true_params, sc.spec, args.replications,
                                      sc.seed, sc.label) for sc in scenarios]
    summaries = []
    for sc in scenarios:
        s = harness.run_scenario(sc, workers=args.workers)
        summaries.append(s)
        print(f"{s.label}: reject={s.reject_rate:.4f} (+/-{s.mc_error:.4f}) "
              f"stop={s.mean_stop_time:.3f}y{' DEGRADED' if s.degraded else ''}", file=sys.stderr)
    csv_path, json_path = harness.write_report(summaries, scenarios, args.out)
    print(csv_path)
    print(json_path)
    return EXIT_OK


def cmd_curve(args) -> int:
    data = harness.load_blinded_events(args.events)
    if data.entry is None:
        raise ValidationError("the curve needs an entry_years column", field="entry_years")
    beta_h1 = _effect(args)
    end = args.end if args.end is not None else float(np.max(data.entry + data.exposure))
    if not end > args.start:
        raise ValidationError("must exceed --start", field="end")
    n = int(math.floor((end - args.start) / args.step + 1e-9))
    grid = args.start + args.step * np.arange(n + 1)
    procs = harness.MONITORED if args.procedure == "all" else [Procedure.parse(args.procedure)]
    if Procedure.FIXED in procs:
        raise ValidationError("the fixed design has no information curve", field="procedure")
    init = None
    if args.alpha0_init is not None:
        init = (args.alpha0_init, 0.0, args.phi_init)
    weights = AllocationWeights(args.allocation_treatment)
    curves = harness.information_curve(data, beta_h1, grid, weights, procs, init)
    sys.stdout.write(harness.curve_csv(curves))
    return EXIT_OK


def cmd_target_info(args) -> int:
    if not args.rate_ratio > 0:
        raise ValidationError("must be positive", field="rate_ratio")
    value = target_information(args.alpha, args.power, math.log(args.rate_ratio))
    print(f"{value:.6f}")
    return EXIT_OK


def _finite(x):
    return None if x is None or not math.isfinite(x) else x


def cmd_fit(args) -> int:
    weights = AllocationWeights(args.allocation_treatment)
    if args.blinded:
        snap = harness.load_blinded_events(args.events)
        beta_h1 = _effect(args)
        proc = Procedure.parse(args.procedure)
        if proc is Procedure.FIXED:
            raise ValidationError("choose a monitoring procedure", field="procedure")
        method = BlindedMethod.LUMPING if proc in (Procedure.TREND_LUMP, Procedure.CONST_LUMP) \
            else BlindedMethod.MIXTURE
        if proc.with_trend:
            fit = (fit_blinded_lumping if method is BlindedMethod.LUMPING else fit_blinded_mixture)(
                snap, beta_h1, weights)
            info = blinded_fisher(fit, beta_h1, weights, snap.exposure).info
            est = {"alpha0_b": fit.alpha0_b, "alpha1_b": fit.alpha1_b, "phi_b": fit.phi_b}
        else:
            fit = fit_const_blinded(snap, beta_h1, weights, method)
            info = info_const_blinded(fit, weights, snap.exposure)
            est = {"mu_c": fit.mu_c, "mu_t": fit.mu_t, "varphi": fit.varphi}
        _dump({"procedure": proc.value, "method": method.value, "beta_h1": beta_h1,
               "converged": fit.converged, "estimates": est, "information": info,
               "subjects": snap.size, "events": int(snap.counts.sum())})
        return EXIT_OK if fit.converged else EXIT_NUMERICAL
    snap = harness.load_events(args.events)
    if args.constant:
        res = fit_const_unblinded(snap)
        _dump({"model": "constant", "converged": res.converged,
               "estimates": {"mu_t": res.params.mu_t, "mu_c": res.params.mu_c,
                             "varphi": res.params.varphi},
               "log_rate_difference": res.log_rate_difference, "se": _finite(res.se),
               "wald_statistic": _finite(res.wald_statistic)})
        return EXIT_OK if res.converged else EXIT_NUMERICAL
    res = fit_trend(snap)
    est = res.estimates
    _dump({"model": "trend", "converged": res.converged, "iterations": res.iterations,
           "estimates": {"alpha0": est.alpha0, "alpha1": est.alpha1, "beta": est.beta,
                         "phi": est.phi},
           "standard_errors": [_finite(v) for v in res.standard_errors()] if res.converged else None,
           "information_beta": _finite(res.information_beta),
           "wald_statistic": _finite(res.wald_statistic), "phi_at_bound": res.at_phi_bound,
           "loglik": res.loglik})
    return EXIT_OK if res.converged else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bcmtrend", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the scenarios of a configuration file")
    p.add_argument("config")
    p.add_argument("--out", default=".")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--procedures", help="comma-separated procedures run for every scenario")
    p.add_argument("--replications", type=int, help="override the configured replications")
    p.set_defaults(func=cmd_simulate)

    def effect_args(q):
        q.add_argument("--beta-h1", type=float, help="planning effect on the log scale")
        q.add_argument("--rate-ratio", type=float, help="planning effect as a rate ratio")
        q.add_argument("--allocation-treatment", type=float, default=0.5)

    p = sub.add_parser("curve", help="blinded information versus calendar time")
    p.add_argument("events")
    effect_args(p)
    p.add_argument("--procedure", default="all")
    p.add_argument("--start", type=float, default=0.5)
    p.add_argument("--step", type=float, default=1.0 / 52.0)
    p.add_argument("--end", type=float)
    p.add_argument("--alpha0-init", type=float)
    p.add_argument("--phi-init", type=float, default=1.0)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("target-info", help="information needed for the planned power")
    p.add_argument("--alpha", type=float, default=0.025)
    p.add_argument("--power", type=float, default=0.8)
    p.add_argument("--rate-ratio", type=float, required=True)
    p.set_defaults(func=cmd_target_info)

    p = sub.add_parser("fit", help="fit an events file (unblinded unless --blinded)")
    p.add_argument("events")
    p.add_argument("--blinded", action="store_true")
    p.add_argument("--constant", action="store_true", help="unblinded constant-rate model")
    effect_args(p)
    p.add_argument("--procedure", default="TrendLump")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "step", 1.0) is not None and not getattr(args, "step", 1.0) > 0:
        parser.error("--step must be positive")
    try:
        return args.func(args)
    except (ValidationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``amplab <subcommand> ...``.

Tables go to stdout as CSV unless ``--out`` is given, in which case a JSON
manifest is written next to the CSV file.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys

import numpy as np

from . import harness
from .amp import SIGNAL_MODELS, amp_iterate, generate_instance, verify_lasso_kkt
from .errors import AmplabError
from .lasso import solve_lasso
from .minimax import (PhasePoint, above_pt_construction, calibrate_lambda_to_tau, calibrate_tau_to_lambda,
                      maximin_lambda, noise_sensitivity, phase_boundary, phase_boundary_parametric)
from .reporting import write_csv, write_table
from .scalar_risk import DiscretePrior, least_favorable_mu, minimax_scalar
from .state_evolution import ObservableKind, SEParams, equilibrium_report, find_hfp, formal_observable


def parse_prior(text, nonneg=False):
    """``three_point:EPS:MU``, ``two_point_positive:EPS:MU`` or ``explicit:ATOMS:WEIGHTS``
    with comma-separated lists."""
    kind, _, rest = text.partition(":")
    parts = rest.split(":")
    try:
        if kind == "three_point" and len(parts) == 2:
            return DiscretePrior.three_point(float(parts[0]), float(parts[1]))
        if kind == "two_point_positive" and len(parts) == 2:
            return DiscretePrior.two_point_positive(float(parts[0]), float(parts[1]))
        if kind == "explicit" and len(parts) == 2:
            atoms = [float(v) for v in parts[0].split(",")]
            weights = [float(v) for v in parts[1].split(",")]
            return DiscretePrior.from_pairs(atoms, weights, nonneg)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    raise argparse.ArgumentTypeError(f"cannot parse prior {text!r}")


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _grid(text):
    a, _, b = text.lower().partition("x")
    return int(a), int(b)


def _emit(args, rows, columns, config=None, seeds=None):
    if getattr(args, "out", None):
        write_table(rows, columns, args.out, config=config if config is not None else vars_of(args),
                    seeds=seeds)
    else:
        write_csv(rows, columns, sys.stdout)


def vars_of(args):
    return {k: v for k, v in vars(args).items() if k != "func" and not callable(v)}


def cmd_scalar_risk(args):
    res = minimax_scalar(args.epsilon, args.nonneg)
    mu = least_favorable_mu(args.epsilon, args.alpha, res.minimax_tau, args.nonneg)
    _emit(args, [(res.epsilon, res.minimax_mse, res.minimax_tau, args.alpha, mu, args.nonneg)],
          ["epsilon", "minimax_mse", "minimax_tau", "alpha", "mu", "nonneg"])


def cmd_phase_boundary(args):
    if args.parametric:
        lo, hi, n = args.tau_grid
        taus = np.linspace(lo, hi, int(n))
        d, r = phase_boundary_parametric(taus, args.nonneg)
        rows = list(zip(taus, np.atleast_1d(d), np.atleast_1d(r)))
        _emit(args, rows, ["tau", "delta", "rho"])
        return
    if args.delta is None:
        raise ValueError("phase-boundary needs --delta or --parametric")
    rows = [(d, phase_boundary(d, args.nonneg)) for d in args.delta]
    _emit(args, rows, ["delta", "rho_mse"])


def cmd_se(args):
    params = SEParams(args.delta, args.sigma, args.tau, args.prior)
    fp = find_hfp(params)
    if not fp.finite:
        _emit(args, [(math.inf, fp.stability, 0)], ["eq_mse", "stability", "iterations"])
        return
    rep = equilibrium_report(params, fp)
    row = dataclasses.asdict(rep)
    row.update(stability=fp.stability, iterations=fp.iterations)
    for kind in ObservableKind:
        try:
            row[kind.value] = formal_observable(kind, params, fp)
        except ZeroDivisionError:
            row[kind.value] = None
    cols = list(row)
    _emit(args, [row], cols)


def cmd_minimax(args):
    rep = noise_sensitivity(PhasePoint(args.delta, args.rho, args.nonneg), args.alpha)
    row = dataclasses.asdict(rep)
    row["rho_mse"] = phase_boundary(args.delta, args.nonneg)
    if rep.below_pt:
        row["maximin_lambda"] = maximin_lambda(PhasePoint(args.delta, args.rho, args.nonneg), args.alpha)
    _emit(args, [row], list(row))


def cmd_calibrate(args):
    params = SEParams(args.delta, args.sigma, args.tau if args.tau is not None else 1.0, args.prior)
    if args.tau is not None:
        lam = calibrate_tau_to_lambda(args.tau, params)
        _emit(args, [(args.tau, lam)], ["tau", "lambda"])
    else:
        tau = calibrate_lambda_to_tau(args.lam, params)
        _emit(args, [(args.lam, tau)], ["lambda", "tau"])


def _instance(args):
    point = PhasePoint(args.delta, args.rho, args.nonneg)
    prior = args.prior or harness.three_point_prior(point, args.alpha, args.sigma)
    return point, prior, generate_instance(args.delta, args.rho, args.sigma, prior, args.N,
                                           args.seed, args.trial, args.signal)


def cmd_amp_run(args):
    point, prior, inst = _instance(args)
    tau = args.tau if args.tau is not None else noise_sensitivity(point, args.alpha).tau_star
    st, conv = amp_iterate(inst, tau, onsager=not args.no_onsager, scale=args.scale, nonneg=args.nonneg)
    lam = st.calibrated_lambda
    kkt = verify_lasso_kkt(inst, st.x, lam, 1e-4 * max(lam, 1e-12), args.nonneg)
    _emit(args, [(tau, st.iteration, conv, float(np.mean((st.x - inst.x0) ** 2)), st.df, lam,
                  kkt.passed, kkt.violation)],
          ["tau", "iterations", "converged", "mse", "df", "calibrated_lambda", "kkt_pass", "kkt_violation"])


def cmd_lasso_run(args):
    point, prior, inst = _instance(args)
    lam = args.lam if args.lam is not None else maximin_lambda(point, args.alpha, args.sigma)
    sol = solve_lasso(inst, lam, args.nonneg)
    _emit(args, [(lam, sol.iterations, float(np.mean((sol.x - inst.x0) ** 2)), sol.support_size,
                  sol.objective, sol.duality_gap)],
          ["lambda", "sweeps", "mse", "support_size", "objective", "duality_gap"])


def cmd_experiment(args):
    cfg = harness.ExperimentConfig.from_json(args.config)
    rep = harness.run_experiment(cfg)
    row = harness.report_row(rep, cfg.R)
    row["hint"] = rep.hint
    seeds = {"master_seed": cfg.effective_seed(), "trials": list(range(cfg.R))}
    _emit(args, [row], harness.REPORT_COLUMNS + ["hint"], config=cfg.to_dict(), seeds=seeds)
    if args.trials_out:
        write_table(harness.trial_rows(rep), harness.TRIAL_COLUMNS, args.trials_out,
                    config=cfg.to_dict(), seeds=seeds)


def cmd_finite_n(args):
    cfg = harness.ExperimentConfig.from_json(args.config)
    reps = harness.finite_n_sweep(cfg, args.Ns)
    rows = []
    for r in reps:
        row = harness.report_row(r, cfg.R)
        row.update(inv_n=1 / r.N, source="empirical")
        rows.append(row)
    # the formal prediction sits at 1/N = 0
    rows.append({"inv_n": 0.0, "fmse": reps[0].fmse_prediction, "mean_emse": reps[0].fmse_prediction,
                 "source": "formal"})
    cols = ["source", "inv_n"] + harness.REPORT_COLUMNS
    _emit(args, rows, cols, config=cfg.to_dict(), seeds={"master_seed": cfg.effective_seed()})


def cmd_contour(args):
    nd, nr = args.grid
    rows = harness.contour_grid(args.quantity, nd, nr, args.alpha, args.nonneg)
    if args.above == "empty":
        rows = [(d, r, None if math.isinf(v) else v) for d, r, v in rows]
    _emit(args, rows, ["delta", "rho", "value"])


def _scan_config(args):
    return harness.ExperimentConfig(delta=args.delta, rho=args.rho, sigma=args.sigma, alpha=args.alpha,
                                    N=args.N, R=max(args.R, 1), seed=args.seed, nonneg=args.nonneg,
                                    signal=args.signal)


def cmd_saddle(args):
    cfg = _scan_config(args)
    rows = harness.saddle_scan(PhasePoint(args.delta, args.rho, args.nonneg), args.mode, cfg, args.grid)
    _emit(args, rows, list(rows[0]), config=cfg.to_dict(), seeds={"master_seed": cfg.effective_seed()})


def cmd_above_pt(args):
    cfg = _scan_config(args)
    point = PhasePoint(args.delta, args.rho, args.nonneg)
    if args.R == 0:
        rows = [dataclasses.asdict(above_pt_construction(point, g, t))
                for t in args.taus for g in args.gammas]
    else:
        rows = harness.above_pt_experiment(point, args.gammas, args.taus, cfg)
    _emit(args, rows, list(rows[0]), config=cfg.to_dict(), seeds={"master_seed": cfg.effective_seed()})


def _add_instance_args(p, with_rho=True):
    p.add_argument("--delta", type=float, required=True)
    if with_rho:
        p.add_argument("--rho", type=float, required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.02)
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nonneg", action="store_true")
    p.add_argument("--signal", choices=SIGNAL_MODELS, default="fixed_support")
    p.add_argument("--out")


def build_parser():
    ap = argparse.ArgumentParser(prog="amplab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scalar-risk", help="minimax soft-threshold risk at sparsity epsilon")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.02)
    p.add_argument("--nonneg", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_scalar_risk)

    p = sub.add_parser("phase-boundary", help="rho_MSE(delta), or the parametric curve")
    p.add_argument("--delta", type=_floats)
    p.add_argument("--parametric", action="store_true")
    p.add_argument("--tau-grid", type=_floats, default=[0.05, 4.0, 200], help="LO,HI,COUNT")
    p.add_argument("--nonneg", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_phase_boundary)

    p = sub.add_parser("se", help="state-evolution fixed point and equilibrium observables")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--prior", type=parse_prior, required=True, help=parse_prior.__doc__)
    p.add_argument("--out")
    p.set_defaults(func=cmd_se)

    p = sub.add_parser("minimax", help="minimax noise sensitivity at a phase point")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.02)
    p.add_argument("--nonneg", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_minimax)

    p = sub.add_parser("calibrate", help="map between AMP threshold and LASSO penalty")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--tau", type=float)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--prior", type=parse_prior, required=True, help=parse_prior.__doc__)
    p.add_argument("--out")
    p.set_defaults(func=cmd_calibrate)

    for name, func in (("amp", cmd_amp_run), ("lasso", cmd_lasso_run)):
        p = sub.add_parser(name, help=f"{name} solver on a synthetic instance")
        ss = p.add_subparsers(dest="action", required=True)
        q = ss.add_parser("run")
        _add_instance_args(q)
        q.add_argument("--trial", type=int, default=None)
        q.add_argument("--prior", type=parse_prior, default=None, help=parse_prior.__doc__)
        if name == "amp":
            q.add_argument("--tau", type=float, default=None)
            q.add_argument("--no-onsager", action="store_true")
            q.add_argument("--scale", choices=["rms", "mad"], default="rms")
        else:
            q.add_argument("--lambda", dest="lam", type=float, default=None)
        q.set_defaults(func=func)

    p = sub.add_parser("experiment", help="Monte Carlo experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--trials-out")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("finite-n", help="experiment repeated over problem sizes")
    p.add_argument("--config", required=True)
    p.add_argument("--Ns", type=lambda s: [int(v) for v in s.split(",")], required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_finite_n)

    p = sub.add_parser("contour", help="phase-plane grid of a minimax quantity")
    p.add_argument("--quantity", choices=["M*", "mu*", "lambda*", "tau*"], required=True)
    p.add_argument("--grid", type=_grid, default=(64, 64), help="e.g. 64x64")
    p.add_argument("--alpha", type=float, default=0.02)
    p.add_argument("--nonneg", action="store_true")
    p.add_argument("--above", choices=["inf", "empty"], default="inf")
    p.add_argument("--out")
    p.set_defaults(func=cmd_contour)

    p = sub.add_parser("saddle", help="vary penalty, amplitude or mixture weight around the saddlepoint")
    p.add_argument("--mode", choices=["vary_lambda", "vary_mu", "mixture"], required=True)
    _add_instance_args(p)
    p.add_argument("--R", type=int, default=50)
    p.add_argument("--grid", type=_floats, default=None)
    p.set_defaults(func=cmd_saddle)

    p = sub.add_parser("above-pt", help="constructions above the phase boundary (R=0: formal only)")
    _add_instance_args(p)
    p.add_argument("--R", type=int, default=50)
    p.add_argument("--gammas", type=_floats, default=[0.75, 0.9, 0.99])
    p.add_argument("--taus", type=_floats, default=[1.5])
    p.set_defaults(func=cmd_above_pt)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (AmplabError, ValueError) as exc:
        print(f"amplab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Subcommands: ``bounds``, ``sweep``, ``mc``, ``validate``. Exit codes:
0 success, 2 config/validation failure, 3 numerical failure.
"""

import argparse
import sys
from dataclasses import replace

from .errors import NumericalError, PilotveilError, ValidationError
from .experiments import SweepSpec, emit_csv, load_scenario, run_bounds, run_sweep, PRESETS
from .mc_oracle import run_delay_trials, run_position_trials
from .signal_model import AnScheme


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="pilotveil",
        description="Bounds on unauthorized delay-based localization under pilot manipulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="JSON config file (empty object means defaults)")
        p.add_argument("--an-seed", type=int, default=None,
                       help="override the artificial-noise realization seed")
        p.add_argument("--b-mode", choices=("paper", "true"), default="paper",
                       help="B-matrix second-term covariance mode")
        p.add_argument("--gain-cal", type=float, default=None,
                       help="override the |alpha|^2 calibration scalar")

    p_bounds = sub.add_parser("bounds", help="two-stage bound report for one scenario")
    common(p_bounds)

    p_sweep = sub.add_parser("sweep", help="figure-preset or custom sweep to CSV")
    common(p_sweep)
    p_sweep.add_argument("--preset", choices=PRESETS, required=True)
    p_sweep.add_argument("--out", required=True, help="output CSV path")

    p_mc = sub.add_parser("mc", help="Monte-Carlo mismatched-estimator validation")
    common(p_mc)
    p_mc.add_argument("--trials", type=int, default=1000)
    p_mc.add_argument("--seed", type=int, default=0)

    p_val = sub.add_parser("validate", help="validate a config file and exit")
    p_val.add_argument("config")
    return parser


def _load(args):
    scenario = load_scenario(args.config)
    if getattr(args, "gain_cal", None) is not None:
        scenario = replace(scenario, gain_calibration=args.gain_cal)
    if getattr(args, "an_seed", None) is not None and isinstance(scenario.scheme, AnScheme):
        scenario = replace(scenario, scheme=replace(scenario.scheme, seed=args.an_seed))
    return scenario


def _cmd_bounds(args):
    scenario = _load(args)
    reports, pos = run_bounds(scenario, b_mode=args.b_mode)
    c = scenario.speed_of_light
    print(f"{'anchor':>8} {'tau [ns]':>12} {'bias [m]':>12} {'rmse(crb) [m]':>14} "
          f"{'rmse(mcrb) [m]':>15} {'rmse(lb) [m]':>13}")
    for r in reports:
        print(f"{r.anchor_id:>8} {r.tau_true * 1e9:12.4f} {r.bias_m:12.6f} "
              f"{c * r.crb ** 0.5:14.6f} {c * r.mcrb ** 0.5:15.6f} {c * r.lb ** 0.5:13.6f}")
    print()
    print(f"pseudo-true position [m]: ({pos.pseudo_true_position[0]:.6f}, "
          f"{pos.pseudo_true_position[1]:.6f})")
    print(f"position bias [m]:        {pos.bias_norm:.6f}")
    print(f"position MCRB rmse [m]:   {pos.mcrb_rmse:.6f}")
    print(f"position LB rmse [m]:     {pos.rmse_lb:.6f}")
    print(f"legitimate CRB rmse [m]:  {pos.crb_legit_rmse:.6f}")
    if pos.runner_up_position is not None:
        print(f"runner-up solution [m]:   ({pos.runner_up_position[0]:.3f}, "
              f"{pos.runner_up_position[1]:.3f})")
    return 0


def _cmd_sweep(args):
    scenario = _load(args)
    spec = SweepSpec(preset=args.preset, base_scenario=scenario,
                     an_seed=args.an_seed if args.an_seed is not None else 1,
                     b_mode=args.b_mode)
    rows = run_sweep(spec)
    emit_csv(rows, args.out)
    n_err = sum(1 for r in rows if r.error)
    print(f"{len(rows)} rows -> {args.out}" + (f" ({n_err} error rows)" if n_err else ""))
    return 0


def _cmd_mc(args):
    scenario = _load(args)
    for idx, anchor in enumerate(scenario.anchors):
        if anchor.role != "eve":
            continue
        rep = run_delay_trials(scenario, idx, args.trials, args.seed)
        mean_ns = rep.empirical_mean[0] * 1e9
        print(f"{anchor.name}: mean tau_hat {mean_ns:.4f} ns, "
              f"bias-to-pseudo {rep.empirical_bias[0] * 1e9:+.5f} ns "
              f"(SE {rep.standard_error[0] * 1e9:.5f} ns), "
              f"rmse/sqrt(lb) = {rep.bound_comparison[1]:.4f}")
    pos = run_position_trials(scenario, args.trials, args.seed)
    print(f"position: empirical rmse {pos.empirical_rmse:.4f} m, "
          f"rmse_lb {pos.bound_comparison[0]:.4f} m, ratio {pos.bound_comparison[1]:.4f}, "
          f"sound-bound ratio {pos.extras['sound_ratio']:.4f}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            load_scenario(args.config)
            print("ok")
            return 0
        if args.command == "bounds":
            return _cmd_bounds(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "mc":
            return _cmd_mc(args)
    except (ValidationError, FileNotFoundError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except PilotveilError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())

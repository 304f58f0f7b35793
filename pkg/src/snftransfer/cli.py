"""Command-line entry point.

Exit codes are a stable scripting contract: 0 success, 2 input or usage
error, 3 computational failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .estimate import EstimationError, bootstrap_ci, predict_rates, read_discharge_csv
from .fixtures import five_snf_cost_matrix, resolve_instance
from .model import InstanceError, instance_to_dict
from .policies import myopic_policy, rpr_policy, two_step_policy
from .scenario import (DEFAULT_LOSS_PENALTY, ScenarioSpec, run_sweep,
                       write_sweep_csv)
from .simulate import simulate_policy
from .solve import (MultichainPolicyError, SolverError, evaluate_policy_average,
                    policy_iteration_average, solve_result_to_dict,
                    value_iteration_discounted)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_COMPUTE = 3


class UsageError(Exception):
    pass


def _write_json(path, payload) -> None:
    text = json.dumps(payload, indent=1, sort_keys=True)
    if path in (None, "-"):
        print(text)
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------

def cmd_solve(args) -> int:
    instance = resolve_instance(args.instance)
    if args.criterion == "avg":
        if args.alpha is not None:
            raise UsageError("--alpha applies only to the discounted criterion")
        result = policy_iteration_average(instance, tol=args.tol)
    else:
        alpha = 0.95 if args.alpha is None else args.alpha
        result = value_iteration_discounted(instance, alpha=alpha, tol=args.tol)
    _write_json(args.out, solve_result_to_dict(instance, result))
    return EXIT_OK


def _pct(num: float, den: float) -> float:
    if den == 0.0:
        return 0.0 if num == 0.0 else float("inf")
    return num / den * 100.0


def _both_gaps(g_heur: float, g_opt: float) -> dict:
    return {
        "vs_optimal_pct": _pct(g_heur - g_opt, g_opt),
        "of_heuristic_pct": _pct(g_heur - g_opt, g_heur),
    }


def cmd_compare(args) -> int:
    instance = resolve_instance(args.instance)
    opt = policy_iteration_average(instance, tol=args.tol)
    rows = {"optimal": opt.gain}
    for name, pol in [("myopic", myopic_policy(instance)),
                      ("rpr", rpr_policy(instance)),
                      (f"two_step(w={args.w:g})", two_step_policy(instance, args.w))]:
        g, _ = evaluate_policy_average(instance, pol)
        rows[name] = g
    payload = {"gains": rows, "gaps": {}}
    print(f"{'policy':>18}  {'avg cost':>10}  {'gap vs opt %':>12}  {'gap of heur %':>13}")
    for name, g in rows.items():
        if name == "optimal":
            print(f"{name:>18}  {g:10.4f}  {'-':>12}  {'-':>13}")
            continue
        gaps = _both_gaps(g, opt.gain)
        payload["gaps"][name] = gaps
        print(f"{name:>18}  {g:10.4f}  {gaps['vs_optimal_pct']:12.2f}  "
              f"{gaps['of_heuristic_pct']:13.2f}")
    if args.out:
        _write_json(args.out, payload)
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = ScenarioSpec(scenario=args.scenario, beta=args.beta, gamma=args.gamma,
                        delta=args.delta, seed=args.seed,
                        num_facilities=args.facilities)
    if args.costs:
        with open(args.costs) as fh:
            costs = json.load(fh)
    else:
        costs = five_snf_cost_matrix()
    costs = np.asarray(costs, dtype=float)
    if costs.shape[1] != spec.num_facilities:
        raise UsageError(
            f"cost matrix covers {costs.shape[1]} facilities but the sweep "
            f"uses {spec.num_facilities}")
    lambdas = ([args.lam] * costs.shape[0] if args.lam is not None
               else [0.2] * costs.shape[0])
    result = run_sweep(spec, args.n, costs, lambdas,
                       loss_penalty=args.K, jobs=args.jobs)
    write_sweep_csv(result, args.out)
    if result.records:
        frac = result.fraction_rpr_beats_myopic()
        print(f"{len(result.records)} instances solved "
              f"({len(result.failures)} failures); "
              f"rpr <= myopic on {frac:.1%}; "
              f"max rpr gap {result.max_gap_rpr_pct():.2f}%")
    else:
        print(f"0 instances solved ({len(result.failures)} failures)")
    return EXIT_OK if not result.failures else EXIT_COMPUTE


def cmd_simulate(args) -> int:
    instance = resolve_instance(args.instance)
    builders = {"myopic": lambda: myopic_policy(instance),
                "rpr": lambda: rpr_policy(instance),
                "two_step": lambda: two_step_policy(instance, args.w),
                "optimal": lambda: policy_iteration_average(instance).policy}
    if args.policy not in builders:
        raise UsageError(f"unknown policy {args.policy!r}")
    est = simulate_policy(instance, builders[args.policy](), horizon=args.horizon,
                          burn_in=args.burn_in, seed=args.seed)
    _write_json(args.out, {"policy": args.policy, **est.to_dict()})
    return EXIT_OK


def cmd_estimate(args) -> int:
    try:
        records = read_discharge_csv(args.data)
    except EstimationError as exc:        # malformed input, not a fit failure
        raise UsageError(str(exc)) from exc
    covariates = [c.strip() for c in args.covariates.split(",") if c.strip()]
    profile = json.loads(args.profile) if args.profile else None
    if args.bootstrap:
        table = bootstrap_ci(records, covariates, reference_profile=profile,
                             num_resamples=args.bootstrap, seed=args.seed)
    else:
        from .estimate import fit_logistic

        table = predict_rates(fit_logistic(records, covariates),
                              reference_profile=profile)
    _write_json(args.out, table.to_dict())
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import run_server

    instance = resolve_instance(args.instance)
    run_server(instance, host=args.host, port=args.port,
               decision_log=args.decision_log, solve_on_startup=args.solve)
    return EXIT_OK


def cmd_export(args) -> int:
    instance = resolve_instance(args.instance)
    _write_json(args.out, instance_to_dict(instance))
    return EXIT_OK


# ----------------------------------------------------------------------
# argument plumbing
# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="snftransfer",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", help="JSON file of flag defaults")

    p = sub.add_parser("solve", help="solve one instance exactly")
    p.add_argument("--instance", required=True)
    p.add_argument("--criterion", choices=["avg", "disc"], default="avg")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--out", default="-")
    add_config(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="gains and gaps of all policies on one instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--w", type=float, default=0.75, help="two-step lookahead weight")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--out", default=None)
    add_config(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="randomized scenario sweep to CSV")
    p.add_argument("--scenario", type=int, choices=[1, 2, 3], required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--K", type=float, default=DEFAULT_LOSS_PENALTY)
    p.add_argument("--lam", type=float, default=None,
                   help="per-type discharge probability (default 0.2)")
    p.add_argument("--facilities", type=int, default=5)
    p.add_argument("--costs", default=None,
                   help="JSON cost matrix; defaults to the packaged five-SNF rates")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    add_config(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="Monte Carlo policy evaluation")
    p.add_argument("--instance", required=True)
    p.add_argument("--policy", default="myopic")
    p.add_argument("--w", type=float, default=0.75)
    p.add_argument("--horizon", type=int, default=10 ** 6)
    p.add_argument("--burn-in", type=int, default=10 ** 4, dest="burn_in")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    add_config(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="readmission rates from a discharge CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--covariates", required=True,
                   help="comma-separated covariate column names")
    p.add_argument("--bootstrap", type=int, default=0,
                   help="number of bootstrap resamples (0 = point estimates only)")
    p.add_argument("--profile", default=None,
                   help="JSON object fixing the reference covariate profile")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    add_config(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("serve", help="run the HTTP advisor")
    p.add_argument("--instance", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--decision-log", default=None, dest="decision_log")
    p.add_argument("--solve", action="store_true",
                   help="compute the optimal policy before serving")
    add_config(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("export", help="write a fixture instance as JSON")
    p.add_argument("--instance", required=True)
    p.add_argument("--out", default="-")
    add_config(p)
    p.set_defaults(func=cmd_export)

    return parser


def _apply_config(parser, argv, args):
    """Config-file values override parser defaults but lose to explicit flags."""
    if not getattr(args, "config", None):
        return args
    with open(args.config) as fh:
        config = json.load(fh)
    if not isinstance(config, dict):
        raise UsageError("--config must hold a JSON object")
    for key, value in config.items():
        if not hasattr(args, key):
            raise UsageError(f"config key {key!r} is not a flag of this command")
        # find whether the flag appeared on the command line
        flag = "--" + key.replace("_", "-")
        if any(tok == flag or tok.startswith(flag + "=") for tok in argv):
            continue
        setattr(args, key, value)
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config(parser, argv, args)
        return args.func(args)
    except (UsageError, InstanceError, FileNotFoundError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, MultichainPolicyError, EstimationError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())

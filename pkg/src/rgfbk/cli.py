"""Command-line entry point: ``rgfbk-bench {run,table,analyze-sgcn,rate-bound}``."""

import argparse
import json
import sys

import numpy as np

from . import bench
from .analysis import RateBoundInputs, estimate_sgcn, optimal_gamma, rate_bound, reference_solution
from .errors import RGFBKError
from .problems import PROBLEMS, build_problem
from .solvers import METHODS, WEIGHT_RULES, default_alpha, default_beta


def _add_run_args(p):
    p.add_argument("--config", help="INI file with an [experiment] section and optional "
                                    "[method.<name>] sections; flags override it")
    p.add_argument("--problem", choices=PROBLEMS)
    p.add_argument("--c", type=float, help="Chandrasekhar parameter (default 0.9)")
    p.add_argument("--n", type=int, help="unknowns for the linear problem (default m // 2)")
    p.add_argument("--cond", type=float, help="condition number for the linear problem")
    p.add_argument("--problem-seed", type=int, dest="problem_seed")
    p.add_argument("--sizes", help="comma list of problem sizes, e.g. 500,2000")
    p.add_argument("--methods", help=f"comma list from {', '.join(METHODS)}")
    p.add_argument("--seeds", help="comma list or range, e.g. 1,2,3 or 1-11")
    p.add_argument("--alpha", type=int)
    p.add_argument("--beta", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--weight-rule", dest="weight_rule", choices=WEIGHT_RULES)
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("--tol", dest="residual_tolerance",
                   help="absolute residual threshold, or 'auto' for 1e-6 + 1e-8 ||r0||")
    p.add_argument("--method-param", action="append", default=[], metavar="METHOD.KEY=VALUE",
                   help="per-method override, e.g. mr-bsnk-style.beta=500 (repeatable)")
    p.add_argument("--x0", type=float, help="constant initial point (default per problem)")
    p.add_argument("--history", action="store_const", const=True,
                   help="write per-iteration history CSVs")
    p.add_argument("--reference", action="store_const", const=True,
                   help="track ||x_k - x*|| using a dense Newton reference (m <= 5000)")
    p.add_argument("--jobs", type=int)
    p.add_argument("--output-dir", dest="output_dir",
                   help=f"output directory (default ${bench.OUTPUT_DIR_ENV} or ./runs)")


_RUN_KEYS = ("problem", "c", "n", "cond", "problem_seed", "sizes", "methods", "seeds", "alpha",
             "beta", "gamma", "weight_rule", "max_iterations", "residual_tolerance", "x0",
             "history", "reference", "jobs", "output_dir")


def spec_from_args(args):
    values, per_method = {}, {}
    if args.config:
        values, per_method = bench.read_config(args.config)
    for key in _RUN_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    for item in args.method_param:
        try:
            lhs, value = item.split("=", 1)
            method, key = lhs.rsplit(".", 1)
        except ValueError:
            raise bench.SpecError("method-param", f"expected METHOD.KEY=VALUE, got {item!r}") from None
        per_method.setdefault(method, {})[key] = value
    return bench.parse_spec(values, per_method)


def cmd_run(args):
    spec = spec_from_args(args)
    result = bench.run_experiment(spec)
    if result.rows:
        sys.stdout.write(bench.emit_table(result.rows, "it"))
    for line in result.failures:
        print(f"failed: {line}", file=sys.stderr)
    print(f"wrote {len(result.files)} files to {spec.output_dir}", file=sys.stderr)
    return result.exit_code


def cmd_table(args):
    rows = bench.read_summary(args.summary)
    sys.stdout.write(bench.emit_table(rows, args.pivot))
    return 0


def cmd_analyze_sgcn(args):
    problem, x0, x_ref = build_problem(args.problem, args.size, c=args.c)
    if args.at == "reference":
        x = x_ref if x_ref is not None else reference_solution(problem, x0)
    else:
        x = x0
    alpha = args.alpha or default_alpha(problem.m)
    beta = args.beta or default_beta(alpha)
    est = estimate_sgcn(problem, x, alpha, beta, budget=args.budget,
                        rng=np.random.default_rng(args.seed))
    print(json.dumps({
        "problem": args.problem, "m": problem.m, "alpha": alpha, "beta": beta, "at": args.at,
        "kappa": est.value, "mode": est.mode, "samples_used": est.samples_used,
        "lower_bound": est.mode == "monte-carlo",
        "worst_block": list(est.worst_block),
    }, indent=2))
    return 0


def cmd_rate_bound(args):
    rho = rate_bound(RateBoundInputs(args.kappa, args.gamma, args.eta))
    gamma_star, factor = optimal_gamma(args.eta)
    out = {"kappa": args.kappa, "gamma": args.gamma, "eta": args.eta, "rho": rho,
           "gamma_star": gamma_star, "rho_star": 1.0 - factor / args.kappa**2}
    if args.eta > 0:
        out["note"] = "conditional on supplied eta"
    print(json.dumps(out, indent=2))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="rgfbk-bench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a method x size x seed grid")
    _add_run_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("table", help="pivot an existing summary.csv")
    p.add_argument("summary")
    p.add_argument("--pivot", choices=("it", "elapsed"), default="it")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("analyze-sgcn", help="stochastic greedy condition number of the Jacobian")
    p.add_argument("--problem", choices=PROBLEMS, default="chandrasekhar")
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--c", type=float, default=0.9)
    p.add_argument("--alpha", type=int)
    p.add_argument("--beta", type=int)
    p.add_argument("--budget", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--at", choices=("x0", "reference"), default="x0")
    p.set_defaults(func=cmd_analyze_sgcn)

    p = sub.add_parser("rate-bound", help="expected contraction factor and optimal gamma")
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--eta", type=float, default=0.0)
    p.set_defaults(func=cmd_rate_bound)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except bench.SpecError as exc:
        parser.error(str(exc))
    except RGFBKError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Compare observed squared-error contraction with the theoretical bound.

For a random consistent linear system (eta = 0) the stochastic greedy
condition number is computed at x0, and the mean per-iteration contraction of
||x_k - x*||^2 over many seeds is set against
rho = 1 - (2 gamma - gamma^2) / kappa^2 for a grid of gamma.

    python scripts/rate_bound_check.py --m 8 --n 4 --alpha 4 --beta 2
"""

import argparse

import numpy as np

from rgfbk.analysis import RateBoundInputs, estimate_sgcn, rate_bound, squared_error_rate
from rgfbk.problems import random_linear
from rgfbk.solvers import SolverConfig, solve


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--m", type=int, default=8)
    parser.add_argument("--n", type=int, default=4)
    parser.add_argument("--alpha", type=int, default=4)
    parser.add_argument("--beta", type=int, default=2)
    parser.add_argument("--cond", type=float, default=10.0)
    parser.add_argument("--problem-seed", type=int, default=0)
    parser.add_argument("--runs", type=int, default=200)
    parser.add_argument("--gammas", default="0.25,0.5,0.75,1.0,1.25,1.5,1.75")
    args = parser.parse_args(argv)

    problem, x_star = random_linear(args.m, args.n, cond=args.cond, seed=args.problem_seed)
    x0 = np.zeros(args.n)
    est = estimate_sgcn(problem, x0, args.alpha, args.beta)
    print(f"kappa = {est.value:.4f} ({est.mode}, {est.samples_used} control sets, "
          f"worst block {est.worst_block})")
    if args.beta < args.n:
        print("note: blocks have fewer rows than unknowns, so the bound is a heuristic here")
    print(f"{'gamma':>6} {'observed':>9} {'bound':>7}")
    for gamma in (float(g) for g in args.gammas.split(",")):
        rates = [squared_error_rate(solve(problem, SolverConfig(alpha=args.alpha, beta=args.beta,
                                                                gamma=gamma, seed=s),
                                          x0, x_ref=x_star))
                 for s in range(args.runs)]
        bound = rate_bound(RateBoundInputs(est.value, gamma, 0.0))
        print(f"{gamma:6.2f} {np.mean(rates):9.4f} {bound:7.4f}")


if __name__ == "__main__":
    main()

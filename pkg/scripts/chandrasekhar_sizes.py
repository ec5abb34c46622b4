"""Iteration counts on the Chandrasekhar H-equation across problem sizes.

Runs RGFBK (and optionally the baselines) at c = 0.9 from x0 = 0 with the
default alpha/beta/gamma rule and prints the median IT per method and size.

    python scripts/chandrasekhar_sizes.py --sizes 500,1000,2000 --seeds 0-10
    python scripts/chandrasekhar_sizes.py --with-baselines --seeds 0-2
"""

import argparse
import sys

from rgfbk.bench import emit_table, parse_spec, run_experiment

BASELINES = "nk-uniform,block-pinv-capped,mr-bsnk-style,md-bsnk-style"


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="500,1000,1500,2000")
    parser.add_argument("--seeds", default="0-10")
    parser.add_argument("--with-baselines", action="store_true",
                        help="also run the pseudoinverse and single-row baselines (slow at m=2000)")
    parser.add_argument("--max-iterations", default="2000",
                        help="iteration cap, mainly to bound nk-uniform")
    parser.add_argument("--output-dir", default="runs/chandrasekhar")
    parser.add_argument("--jobs", default="1")
    args = parser.parse_args(argv)

    methods = "rgfbk," + BASELINES if args.with_baselines else "rgfbk"
    spec = parse_spec({
        "problem": "chandrasekhar", "c": "0.9", "sizes": args.sizes, "seeds": args.seeds,
        "methods": methods, "max_iterations": args.max_iterations,
        "output_dir": args.output_dir, "jobs": args.jobs,
    })
    result = run_experiment(spec)
    print(emit_table(result.rows))
    print(emit_table(result.rows, "elapsed"))
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())

"""RGFBK and baselines on the Broyden tridiagonal problem from x0 = -1.

    python scripts/broyden_sweep.py --sizes 250,500,1000 --seeds 0-10
"""

import argparse
import sys

from rgfbk.bench import emit_table, parse_spec, run_experiment


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="250,500,1000")
    parser.add_argument("--seeds", default="0-10")
    parser.add_argument("--methods", default="rgfbk,block-pinv-capped,mr-bsnk-style,md-bsnk-style")
    parser.add_argument("--output-dir", default="runs/broyden")
    parser.add_argument("--jobs", default="1")
    args = parser.parse_args(argv)

    spec = parse_spec({
        "problem": "broyden", "sizes": args.sizes, "seeds": args.seeds, "methods": args.methods,
        "output_dir": args.output_dir, "jobs": args.jobs, "history": "true",
    })
    result = run_experiment(spec)
    print(emit_table(result.rows))
    print(emit_table(result.rows, "elapsed"))
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())

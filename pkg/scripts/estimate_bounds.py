"""
Estimate Sobol indices of an objective and turn them into a constraint list
Prints the S_i / T_i table and a JSON experiment spec whose constraints come
from the estimate with a relative safety margin.

Usage:
    python scripts/estimate_bounds.py
    python scripts/estimate_bounds.py --objective rosenbrock3 --n-base 32768 --margin 0.1 --out specs/estimated.json
"""
import argparse
import json
import os
import sys

import numpy as np
from dotenv import load_dotenv

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
load_dotenv()

from app.config import settings, setup_logging  # noqa: E402
from app.errors import SobolOptError  # noqa: E402
from app.services import experiments, saltelli  # noqa: E402
from app.services.testbed import get_objective_spec  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description="Saltelli estimate plus suggested Sobol constraints")
    parser.add_argument("--objective", default="rosenbrock3")
    parser.add_argument("--n-base", type=int, default=settings.SALTELLI_N_BASE)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--margin", type=float, default=0.1)
    parser.add_argument("--assume-zero", action="store_true", help="turn near-zero estimates into eliminations")
    parser.add_argument("--full-total", action="store_true", help="total families over every subset")
    parser.add_argument("--out", default=None, help="write the JSON spec here instead of stdout")
    args = parser.parse_args()

    setup_logging("WARNING")
    try:
        spec = get_objective_spec(args.objective)
        est = experiments.run_sensitivity(args.objective, args.n_base, args.seed)
        constraints = saltelli.suggest_bounds(est, args.margin, args.assume_zero, args.full_total)
    except (SobolOptError, ValueError) as e:
        print(f"[ERROR] {e}")
        return 1

    print(f"Objective: {spec.id} ({spec.description})")
    print(f"n_base: {est.n_base} | evaluations: {est.total_evals} | Var f: {est.variance:.5g}")
    print("=" * 50)
    print(saltelli.format_table(est))
    if spec.first_order is not None:
        print("-" * 50)
        print(f"{'exact':>6} S = {np.round(spec.first_order, 4).tolist()}  T = {np.round(spec.total, 4).tolist()}")
    print("=" * 50)

    document = {
        "name": f"{spec.id}-estimated",
        "objective": spec.id,
        "constraints": [c.model_dump(mode="json") for c in constraints],
    }
    text = json.dumps(document, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        print(f"[OK] Wrote {len(constraints)} constraints to {args.out}")
    else:
        print(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""
Run experiments A-D on the scaled 3D Rosenbrock function and print a summary table
Each experiment is replicated over the given seeds; the CSV of every experiment
is written next to the table when --out-dir is set.

Usage:
    python scripts/run_experiments.py
    python scripts/run_experiments.py --seeds 1-5 --budget 100 --out-dir results
"""
import argparse
import os
import sys
from pathlib import Path

from dotenv import load_dotenv

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
load_dotenv()

from app.config import setup_logging  # noqa: E402
from app.errors import SobolOptError  # noqa: E402
from app.services import experiments  # noqa: E402

# Single-run figures reported for each experiment: (n_eval, m_best)
REPORTED = {
    "A": (93, 0.0089),
    "B": (78, 0.0052),
    "C": (44, 0.0006),
    "D": (45, 0.0049),
}


def main() -> int:
    parser = argparse.ArgumentParser(description="Replicate experiments A-D")
    parser.add_argument("--seeds", default="1-20")
    parser.add_argument("--budget", type=int, default=100)
    parser.add_argument("--degree", type=int, default=4)
    parser.add_argument("--presets", default="ABCD")
    parser.add_argument("--out-dir", default=None)
    args = parser.parse_args()

    setup_logging("WARNING")
    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    print(f"Seeds: {args.seeds} | budget: {args.budget} | D: {args.degree}")
    print("=" * 72)
    print(f"{'exp':>4} {'median n_eval':>14} {'IQR':>6} {'median m_best':>14} {'IQR':>10} {'reported':>14}")
    print("-" * 72)

    for tag in args.presets.upper():
        try:
            spec = experiments.load_spec(None, {
                "name": tag,
                "preset": tag,
                "seeds": args.seeds,
                "budget_solves": args.budget,
                "degree": args.degree,
            })
            results = experiments.run_experiment(spec)
        except SobolOptError as e:
            print(f"[ERROR] experiment {tag}: {e}")
            return 1

        s = experiments.summarize(results)
        n_rep, m_rep = REPORTED[tag]
        print(
            f"{tag:>4} {s['n_eval_median']:>14.1f} {s['n_eval_iqr']:>6.1f} "
            f"{s['m_best_median']:>14.4g} {s['m_best_iqr']:>10.3g} {f'{n_rep} / {m_rep}':>14}"
        )
        inconsistent = sum(r.termination.value == "MODEL_INCONSISTENT" for r in results)
        if inconsistent:
            print(f"     {inconsistent}/{len(results)} runs stopped with MODEL_INCONSISTENT")
        if out_dir:
            (out_dir / f"experiment_{tag.lower()}.csv").write_text(
                experiments.results_csv(tag, results), encoding="utf-8"
            )

    print("=" * 72)
    return 0


if __name__ == "__main__":
    sys.exit(main())

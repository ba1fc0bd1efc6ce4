"""Run the full property suite and print one line per property."""
import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from distval.verify import run_property_suite


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--trials", type=int, default=100)
    parser.add_argument("--tv-samples", type=int, default=1_000_000)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()
    reports = run_property_suite(
        seed=args.seed,
        trials=args.trials,
        tv_samples=args.tv_samples,
        threads=args.threads,
    )
    for r in reports:
        print(
            f"{r.property_id:24s} {r.status:14s} "
            f"max_dev={r.max_deviation:.3e} tol={r.tolerance:.0e}"
        )
    return 1 if any(r.status == "fail" for r in reports) else 0


if __name__ == "__main__":
    sys.exit(main())

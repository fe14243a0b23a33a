"""Run every method and (T, N) setting over one task file and write a single
summary CSV with raw and task accuracy per row.

    python scripts/run_grid.py --tasks tasks.json --out runs/grid
    python scripts/run_grid.py --miniscan 100 --out runs/grid_scan
"""

import argparse
import dataclasses
from pathlib import Path

from inductor.harness import ExperimentConfig, run, write_csv

SETTINGS = [
    ("io", 1, 1),
    ("sc", 1, 5),
    ("sr", 3, 5),
    ("refine", 1, 1),
    ("refine", 3, 1),
    ("refine", 1, 5),
    ("refine", 3, 5),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--tasks")
    src.add_argument("--miniscan", type=int, metavar="COUNT", help="generate COUNT MiniSCAN tasks instead")
    ap.add_argument("--config", help="base config; method/iters/samples are overridden per row")
    ap.add_argument("--out", default="runs/grid")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    base = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    if args.tasks:
        base = dataclasses.replace(base, tasks=args.tasks, generate=None)
    else:
        base = dataclasses.replace(base, generate={"miniscan": {"count": args.miniscan, "seed": args.seed}})
    reports = []
    for method, T, N in SETTINGS:
        out = Path(args.out) / f"{method}_T{T}_N{N}"
        cfg = dataclasses.replace(base, method=method, iters=T, samples=N, seed=args.seed, output_dir=str(out))
        rep = run(cfg).reports[0]
        reports.append(rep)
        print(f"{method:7s} T={T} N={N}  c={rep.raw_accuracy:.3f}  c_t={rep.task_accuracy:.3f}  calls={rep.mean_api_calls:.1f}")
    write_csv(reports, Path(args.out) / "grid.csv")
    print(f"wrote {Path(args.out) / 'grid.csv'}")


if __name__ == "__main__":
    main()

"""Perturb a List Functions task file at several noise levels and run the
same method on each copy, with and without the noisy-examples note.

    python scripts/noise_sweep.py --tasks listfn.json --config base.yaml
"""

import argparse
import dataclasses
from pathlib import Path

from inductor.datasets import NoiseSpec, load_tasks, perturb_noise, save_tasks
from inductor.harness import ExperimentConfig, run, write_csv

FRACTIONS = (0.0, 0.125, 0.25, 0.5)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tasks", required=True)
    ap.add_argument("--config")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/noise")
    args = ap.parse_args()

    base = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    tasks = load_tasks(args.tasks)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for frac in FRACTIONS:
        path = out / f"tasks_noise{frac:g}.json"
        save_tasks([perturb_noise(t, NoiseSpec(frac, args.seed)) if frac else t for t in tasks], path)
        for note in (False, True):
            name = f"noise{frac:g}_{'note' if note else 'plain'}"
            cfg = dataclasses.replace(base, tasks=str(path), generate=None, noisy_prompt=note, output_dir=str(out / name))
            rep = run(cfg).reports[0]
            reports.append(rep)
            print(f"{name:18s} c={rep.raw_accuracy:.3f} c_t={rep.task_accuracy:.3f}")
    write_csv(reports, out / "noise.csv")


if __name__ == "__main__":
    main()

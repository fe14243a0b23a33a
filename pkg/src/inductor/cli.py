"""Command line entry point: ``inductor {run,gen,perturb,ood,report}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .core import TaskKind
from .datasets import NoiseSpec, load_tasks, ood_sample_lists, perturb_noise, save_tasks, with_ood
from .harness import (
    ExperimentConfig,
    RunError,
    aggregate_records,
    cost_report,
    format_table,
    generate_miniscan_tasks,
    read_traces,
    run,
)

OUTPUT_MODES = {"colors": "color_words", "pseudo": "pseudowords"}


def _noise_suffix(fraction: float, seed: int) -> str:
    return f".noise{fraction:g}-seed{seed}"


def sibling_path(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix + path.suffix)


def cmd_run(args: argparse.Namespace) -> int:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    overrides = {
        "method": args.method,
        "iters": args.iters,
        "samples": args.samples,
        "interpreter": args.interpreter,
        "model": args.model,
        "seed": args.seed,
        "cache_dir": args.cache_dir,
        "tasks": args.tasks,
        "output_dir": args.out,
        "workers": args.workers,
        "backend": args.backend,
        "script": args.script,
    }
    cfg = dataclasses.replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    if args.strict:
        cfg = dataclasses.replace(cfg, strict=True)
    if args.noisy_prompt:
        cfg = dataclasses.replace(cfg, noisy_prompt=True)
    if args.compare_interpreters:
        cfg = dataclasses.replace(cfg, compare_interpreters=True)
    try:
        result = run(cfg)
    except RunError as e:
        print(f"aborted: {e}", file=sys.stderr)
        return 2
    for rep in result.reports:
        print(
            f"{rep.method} {rep.dataset} model={rep.model} T={rep.T} N={rep.N} interpreter={rep.interpreter}: "
            f"c={rep.raw_accuracy:.4f} c_t={rep.task_accuracy:.4f} "
            f"calls={rep.mean_api_calls:.2f} failed={rep.n_failed}/{rep.n_tasks}"
        )
    for name, p in result.paths.items():
        print(f"  {name}: {p}")
    return 0


def cmd_gen(args: argparse.Namespace) -> int:
    tasks = generate_miniscan_tasks(args.count, args.seed, OUTPUT_MODES[args.output_mode])
    out = Path(args.out or f"miniscan_{args.output_mode}_seed{args.seed}.json")
    save_tasks(tasks, out)
    print(f"wrote {len(tasks)} tasks to {out}")
    return 0


def cmd_perturb(args: argparse.Namespace) -> int:
    src = Path(args.tasks)
    spec = NoiseSpec(args.fraction, args.seed)
    tasks = [perturb_noise(t, spec) for t in load_tasks(src)]
    out = Path(args.out) if args.out else sibling_path(src, _noise_suffix(args.fraction, args.seed))
    save_tasks(tasks, out)
    print(f"wrote {len(tasks)} perturbed tasks to {out}")
    return 0


def cmd_ood(args: argparse.Namespace) -> int:
    src = Path(args.tasks)
    tasks = []
    for t in load_tasks(src, TaskKind.LISTFN):
        tasks.append(with_ood(t, ood_sample_lists(t, args.n, seed=args.seed)) if t.truth_program else t)
    out = Path(args.out) if args.out else sibling_path(src, f".ood-seed{args.seed}")
    save_tasks(tasks, out)
    print(f"wrote {len(tasks)} tasks to {out}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    records = read_traces(args.traces)
    report = aggregate_records(records)
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.costs:
        print(format_table(cost_report(records)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="inductor", description="Hypothesis refinement experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a method over a task set")
    r.add_argument("--config", help="YAML or JSON experiment config")
    r.add_argument("--tasks", help="task JSON file (overrides config)")
    r.add_argument("--method", choices=["io", "sc", "sr", "refine"])
    r.add_argument("--iters", type=int, metavar="T")
    r.add_argument("--samples", type=int, metavar="N")
    r.add_argument("--interpreter", choices=["symbolic", "lm"])
    r.add_argument("--model")
    r.add_argument("--seed", type=int)
    r.add_argument("--cache-dir")
    r.add_argument("--out", help="output directory")
    r.add_argument("--workers", type=int)
    r.add_argument("--backend", choices=["scripted", "http"])
    r.add_argument("--script", help="'oracle' or a JSON file of scripted responses per task id")
    r.add_argument("--strict", action="store_true", help="abort on the first task error")
    r.add_argument("--noisy-prompt", action="store_true")
    r.add_argument("--compare-interpreters", action="store_true")
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("gen", help="generate synthetic tasks")
    gsub = g.add_subparsers(dest="dataset", required=True)
    gm = gsub.add_parser("miniscan")
    gm.add_argument("--count", type=int, default=100)
    gm.add_argument("--output-mode", choices=sorted(OUTPUT_MODES), default="colors")
    gm.add_argument("--seed", type=int, default=0)
    gm.add_argument("--out")
    gm.set_defaults(func=cmd_gen)

    pt = sub.add_parser("perturb", help="perturb seen examples")
    psub = pt.add_subparsers(dest="perturbation", required=True)
    pn = psub.add_parser("noise")
    pn.add_argument("--tasks", required=True)
    pn.add_argument("--fraction", type=float, required=True)
    pn.add_argument("--seed", type=int, default=0)
    pn.add_argument("--out")
    pn.set_defaults(func=cmd_perturb)

    o = sub.add_parser("ood", help="attach longer list inputs labelled by truth programs")
    o.add_argument("--tasks", required=True)
    o.add_argument("--n", type=int, default=10)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out")
    o.set_defaults(func=cmd_ood)

    rep = sub.add_parser("report", help="rebuild a report from a traces file")
    rep.add_argument("--traces", required=True)
    rep.add_argument("--out")
    rep.add_argument("--costs", action="store_true", help="also print the per-dataset cost table")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Experiment orchestration, metrics and persisted artifacts.

Traces (JSONL) are the source of truth: reports are always computed from
trace records, so regenerating a report from disk gives the same bytes as
the live run.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, Union

import yaml

from .core import (
    HypothesisForm,
    Method,
    RunConfig,
    Task,
    TaskKind,
    parse_value,
    render_value,
)
from .datasets import MiniScanSpec, gen_miniscan, load_tasks
from .engine import LmInterpreter, RunTrace, _eval_rule, _finish, run_task, task_accuracy
from .proposer import (
    ChatCompletionsBackend,
    CostLedger,
    LmClient,
    LmRequest,
    ResponseCache,
    ScriptedBackend,
    load_templates,
)

log = logging.getLogger(__name__)

DATASET_NAMES = {
    TaskKind.ACRE: "ACRE",
    TaskKind.MINISCAN: "MiniSCAN",
    TaskKind.LISTFN: "List Fns",
    TaskKind.MINIARC: "MiniARC",
}


class MixedMethodError(ValueError):
    pass


class RunError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def raw_accuracy(a_taus: Sequence[float]) -> float:
    return math.fsum(a_taus) / len(a_taus)


def task_level_accuracy(a_taus: Sequence[float]) -> float:
    return sum(1 for a in a_taus if a == 1.0) / len(a_taus)


@dataclass
class Report:
    method: str
    model: str
    dataset: str
    interpreter: str
    T: int
    N: int
    per_task: list
    raw_accuracy: float
    task_accuracy: float
    mean_api_calls: float
    mean_cost: float
    n_tasks: int
    n_failed: int
    raw_accuracy_ood: Optional[float] = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, ensure_ascii=False) + "\n"

    def csv_row(self) -> dict:
        return {
            "method": self.method,
            "dataset": self.dataset,
            "model": self.model,
            "T": self.T,
            "N": self.N,
            "interpreter": self.interpreter,
            "c": self.raw_accuracy,
            "c_t": self.task_accuracy,
            "mean_api_calls": self.mean_api_calls,
            "mean_cost": self.mean_cost,
            "n_tasks": self.n_tasks,
            "n_failed": self.n_failed,
        }


CSV_FIELDS = ("method", "dataset", "model", "T", "N", "interpreter", "c", "c_t",
              "mean_api_calls", "mean_cost", "n_tasks", "n_failed")


def aggregate_records(records: Sequence[dict]) -> Report:
    if not records:
        raise ValueError("no traces to aggregate")
    sig = {(r["method"], r["model"], r["interpreter"], r["T"], r["N"]) for r in records}
    if len(sig) > 1:
        raise MixedMethodError(f"traces mix configurations: {sorted(sig)}")
    kinds = {r["kind"] for r in records}
    dataset = "+".join(DATASET_NAMES[TaskKind(k)] for k in sorted(kinds))
    ordered = sorted(records, key=lambda r: r["task_id"])
    ok = [r for r in ordered if r.get("error") is None]
    failed = len(ordered) - len(ok)
    if failed:
        log.warning("%d of %d tasks failed and are excluded from the means", failed, len(ordered))
    per_task = [
        {
            "task_id": r["task_id"],
            "a_tau": r["a_tau"],
            "iterations_used": len(r["iterations"]),
            "api_calls": r["api_calls"],
            "tokens": r["tokens"],
            "cost": r["cost"],
            "error": r.get("error"),
        }
        for r in ordered
    ]
    a = [r["a_tau"] for r in ok]
    ood = [r["a_tau_ood"] for r in ok if r.get("a_tau_ood") is not None]
    first = ordered[0]
    return Report(
        method=first["method"],
        model=first["model"],
        dataset=dataset,
        interpreter=first["interpreter"],
        T=first["T"],
        N=first["N"],
        per_task=per_task,
        raw_accuracy=raw_accuracy(a) if a else 0.0,
        task_accuracy=task_level_accuracy(a) if a else 0.0,
        mean_api_calls=math.fsum(r["api_calls"] for r in ok) / len(ok) if ok else 0.0,
        mean_cost=math.fsum(r["cost"] for r in ok) / len(ok) if ok else 0.0,
        n_tasks=len(ordered),
        n_failed=failed,
        raw_accuracy_ood=raw_accuracy(ood) if ood else None,
    )


def aggregate(traces: Sequence[RunTrace]) -> Report:
    return aggregate_records([t.to_record() for t in traces])


def read_traces(path: Union[str, Path]) -> list:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def cost_report(records: Iterable[Union[dict, RunTrace]]) -> list:
    """Mean API calls and cost (in cents) per (dataset, method, model)."""
    groups: dict = {}
    for r in records:
        if isinstance(r, RunTrace):
            r = r.to_record()
        key = (DATASET_NAMES[TaskKind(r["kind"])], r["method"], r["model"], r["T"], r["N"])
        groups.setdefault(key, []).append(r)
    rows = []
    for (dataset, method, model, T, N), rs in sorted(groups.items()):
        rows.append(
            {
                "dataset": dataset,
                "method": method,
                "model": model,
                "T": T,
                "N": N,
                "tasks": len(rs),
                "mean_api_calls": math.fsum(r["api_calls"] for r in rs) / len(rs),
                "mean_cost_cents": 100.0 * math.fsum(r["cost"] for r in rs) / len(rs),
            }
        )
    return rows


def format_table(rows: Sequence[dict]) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    cells = [[f"{r[c]:.2f}" if isinstance(r[c], float) else str(r[c]) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def write_csv(reports: Sequence[Report], path: Union[str, Path]) -> None:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for rep in reports:
        w.writerow(rep.csv_row())
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_traces(traces: Sequence[RunTrace], path: Union[str, Path]) -> None:
    Path(path).write_text("".join(t.to_json() + "\n" for t in traces), encoding="utf-8")


# ---------------------------------------------------------------------------
# Scripted responders
# ---------------------------------------------------------------------------



def _trailing_input(prompt: str) -> Optional[str]:
    body = prompt.rstrip()
    if not body.endswith("Output:"):
        return None
    start = body.rfind("Input:")
    return None if start < 0 else body[start + len("Input:") : -len("Output:")]


def _truth_rule_text(task: Task) -> Optional[str]:
    if task.truth_program is None:
        return None
    if task.kind is TaskKind.MINISCAN:
        return "Rule:\n" + task.truth_program
    return "Rule:\n```\n" + task.truth_program + "\n```"


def oracle_responder(task: Task) -> Callable[[LmRequest], str]:
    """Scripted LM that knows the task.

    Rule requests are answered with the task's truth program/grammar,
    translation requests with the truth program, and any prompt ending in
    ``Input: ...\\nOutput:`` with the recorded output for that input.
    """
    table = {}
    for ex in (*task.seen, *task.unseen, *(task.ood or ())):
        table.setdefault(render_value(ex.input), render_value(ex.output))

    def respond(req: LmRequest) -> str:
        prompt = req.prompt
        x_text = _trailing_input(prompt)
        if x_text is not None and not prompt.startswith("Generate a rule"):
            try:
                x = parse_value(x_text, task.kind, "in")
            except ValueError:
                return "I cannot tell."
            return table.get(render_value(x), "I cannot tell.")
        if prompt.startswith("You are an expert programmer"):
            return "```\n" + (task.truth_program or "") + "\n```"
        return _truth_rule_text(task) or "I do not know the rule."

    return respond


# ---------------------------------------------------------------------------
# Experiment configuration and orchestration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    tasks: Optional[str] = None
    kind: Optional[str] = None
    generate: Optional[dict] = None  # {"miniscan": {"count":..., "seed":..., "output_mode":...}}
    method: str = "refine"
    iters: int = 3
    samples: int = 5
    interpreter: str = "symbolic"
    model: str = "scripted"
    seed: int = 0
    temperature: float = 0.7
    hypothesis_form: str = "natural_language"
    carry_best: bool = True
    noisy_prompt: bool = False
    backend: str = "scripted"  # scripted | http
    script: Optional[str] = "oracle"  # "oracle" or a JSON file {task_id: [responses...]}
    cache_dir: Optional[str] = None
    output_dir: str = "runs/latest"
    templates_dir: Optional[str] = None
    workers: int = 1
    strict: bool = False
    compare_interpreters: bool = False
    rates: dict = field(default_factory=dict)
    base_url: Optional[str] = None

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ExperimentConfig":
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        base = Path(path).resolve().parent
        cfg = cls(**data)
        for name in ("tasks", "script", "templates_dir"):
            v = getattr(cfg, name)
            if v and v != "oracle" and not Path(v).is_absolute() and (base / v).exists():
                setattr(cfg, name, str(base / v))
        return cfg

    def run_config(self) -> RunConfig:
        return RunConfig(
            method=Method(self.method),
            max_iterations=self.iters,
            samples_per_iteration=self.samples,
            temperature_multi=self.temperature,
            interpreter_mode=self.interpreter,
            seed=self.seed,
            model_name=self.model,
            noisy_prompt=self.noisy_prompt,
            carry_best=self.carry_best,
            hypothesis_form=HypothesisForm(self.hypothesis_form),
        )

    def load(self) -> list:
        if self.generate:
            spec = self.generate.get("miniscan")
            if spec is None:
                raise ValueError("only 'miniscan' generation is supported")
            return generate_miniscan_tasks(
                spec.get("count", 100), spec.get("seed", 0), spec.get("output_mode", "color_words")
            )
        if not self.tasks:
            raise ValueError("config needs 'tasks' or 'generate'")
        return load_tasks(self.tasks, TaskKind(self.kind) if self.kind else None)


def generate_miniscan_tasks(count: int, seed: int, output_mode: str = "color_words") -> list:
    if output_mode in ("colors", "color"):
        output_mode = "color_words"
    if output_mode in ("pseudo", "pseudo_words"):
        output_mode = "pseudowords"
    return [
        gen_miniscan(MiniScanSpec(seed=seed * 1_000_003 + i, output_mode=output_mode, task_id=f"miniscan-{i:03d}"))
        for i in range(count)
    ]


@dataclass
class RunResult:
    traces: list
    reports: list
    paths: dict


class Runner:
    """Runs one configured method over a task list."""

    def __init__(self, cfg: ExperimentConfig, backend_factory: Optional[Callable[[Task], object]] = None):
        self.cfg = cfg
        self.run_cfg = cfg.run_config()
        self.templates = load_templates(Path(cfg.templates_dir) if cfg.templates_dir else None)
        self.cache = ResponseCache(cfg.cache_dir) if cfg.cache_dir else None
        self.rates = {k: tuple(v) for k, v in cfg.rates.items()} or None
        self.backend_factory = backend_factory or self._default_backend_factory()

    def _default_backend_factory(self):
        if self.cfg.backend == "http":
            shared = ChatCompletionsBackend(base_url=self.cfg.base_url)
            return lambda task: shared
        if self.cfg.backend != "scripted":
            raise ValueError(f"unknown backend {self.cfg.backend!r}")
        if self.cfg.script in (None, "oracle"):
            return lambda task: ScriptedBackend(responder=oracle_responder(task))
        script = json.loads(Path(self.cfg.script).read_text(encoding="utf-8"))
        return lambda task: ScriptedBackend(list(script.get(task.id, [])))

    def client_for(self, task: Task) -> LmClient:
        return LmClient(self.backend_factory(task), self.cfg.model, self.cache, CostLedger(), self.rates)

    def run_one(self, task: Task) -> RunTrace:
        trace = run_task(task, self.run_cfg, self.client_for(task), self.templates)
        if trace.error and self.cfg.strict:
            raise RunError(f"task {task.id}: {trace.error}")
        return trace

    def run(self, tasks: Sequence[Task]) -> list:
        if self.cfg.workers <= 1:
            return [self.run_one(t) for t in tasks]
        with ThreadPoolExecutor(self.cfg.workers) as pool:
            return list(pool.map(self.run_one, tasks))

    def lm_interpreter_traces(self, tasks: Sequence[Task], traces: Sequence[RunTrace]) -> list:
        """Re-apply each final rule with the LM instead of the symbolic
        interpreter; same rules, second application path."""
        out = []
        cfg_lm = dataclasses.replace(self.run_cfg, interpreter_mode="lm")
        for task, tr in zip(tasks, traces):
            client = self.client_for(task)
            twin = RunTrace(task.id, task.kind, cfg_lm, tr.iterations, tr.final, ledger=client.ledger, error=tr.error)
            if tr.error is None:
                _finish(twin, task, _eval_rule(tr, LmInterpreter(client, task.kind, self.templates)))
            out.append(twin)
        return out


def run(cfg: Union[ExperimentConfig, str, Path], backend_factory=None) -> RunResult:
    if not isinstance(cfg, ExperimentConfig):
        cfg = ExperimentConfig.from_file(cfg)
    if cfg.compare_interpreters and cfg.method != "refine":
        raise ValueError("compare_interpreters needs method=refine")
    tasks = cfg.load()
    runner = Runner(cfg, backend_factory)
    traces = runner.run(tasks)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"traces": out / "traces.jsonl", "report": out / "report.json", "csv": out / "summary.csv"}
    write_traces(traces, paths["traces"])
    reports = [aggregate(traces)]
    paths["report"].write_text(reports[0].to_json(), encoding="utf-8")
    if cfg.compare_interpreters:
        lm_traces = runner.lm_interpreter_traces(tasks, traces)
        paths["traces_lm"] = out / "traces_lm.jsonl"
        paths["report_lm"] = out / "report_lm.json"
        write_traces(lm_traces, paths["traces_lm"])
        reports.append(aggregate(lm_traces))
        paths["report_lm"].write_text(reports[1].to_json(), encoding="utf-8")
    write_csv(reports, paths["csv"])
    return RunResult(traces, reports, paths)


__all__ = [
    "ExperimentConfig",
    "MixedMethodError",
    "Report",
    "RunError",
    "RunResult",
    "Runner",
    "aggregate",
    "aggregate_records",
    "cost_report",
    "format_table",
    "generate_miniscan_tasks",
    "oracle_responder",
    "raw_accuracy",
    "read_traces",
    "run",
    "task_accuracy",
    "task_level_accuracy",
]

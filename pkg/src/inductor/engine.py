"""Propose / select / refine loop and the IO, SC and SR baselines."""

from __future__ import annotations

import dataclasses
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .blicket import BlicketInterpreter
from .core import (
    LABELS,
    OUTPUT_KIND,
    CompiledRule,
    CompileFailure,
    Example,
    Failure,
    FormatError,
    Hypothesis,
    Method,
    Prediction,
    RunConfig,
    Task,
    TaskKind,
    Value,
    ValueKind,
    parse_value,
    render_prediction,
    values_equal,
)
from .programs import ProgramInterpreter
from .proposer import (
    CostLedger,
    LmClient,
    LmRequest,
    LmTranslator,
    PromptBuilder,
    ProposerError,
    extract_rule,
    propose,
)
from .proposer.prompts import format_value
from .qcfg import QcfgInterpreter


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------


@dataclass
class ScoredHypothesis:
    hypothesis: Hypothesis
    compiled: Optional[CompiledRule]
    score: float
    predictions: list  # [(Prediction, correct)] aligned with task.seen
    compile_error: Optional[str] = None

    @property
    def n_correct(self) -> int:
        return sum(1 for _, ok in self.predictions if ok)


@dataclass
class IterationRecord:
    t: int
    candidates: list
    selected: int
    # "" when the selected rule is perfect; None when no further iteration
    # would consume it (the last allowed iteration)
    feedback: Optional[str]

    @property
    def best(self) -> ScoredHypothesis:
        return self.candidates[self.selected]


@dataclass
class RunTrace:
    task_id: str
    kind: TaskKind
    config: RunConfig
    iterations: list = field(default_factory=list)
    final: Optional[ScoredHypothesis] = None
    unseen_predictions: list = field(default_factory=list)
    a_tau: Optional[float] = None
    ood_predictions: Optional[list] = None
    a_tau_ood: Optional[float] = None
    ledger: CostLedger = field(default_factory=CostLedger)
    error: Optional[str] = None

    @property
    def final_hypothesis(self) -> Optional[Hypothesis]:
        return None if self.final is None else self.final.hypothesis

    def to_record(self) -> dict:
        """One JSONL line. Everything the report needs is in here."""
        cfg = self.config
        final_rule = None
        translation = None
        if self.final is not None:
            h = self.final.hypothesis
            final_rule = h.payload if h.payload is not None else h.raw_text
            if self.final.compiled is not None:
                translation = self.final.compiled.translation_source
        rec = {
            "task_id": self.task_id,
            "kind": self.kind.value,
            "method": cfg.method.value,
            "model": cfg.model_name,
            "T": cfg.max_iterations,
            "N": cfg.samples_per_iteration,
            "interpreter": cfg.interpreter_mode,
            "iterations": [
                {
                    "t": it.t,
                    "candidates": [
                        {
                            "text": c.hypothesis.raw_text,
                            "score": c.score,
                            **({"error": c.compile_error} if c.compile_error else {}),
                            **(
                                {"program": c.compiled.translation_source}
                                if c.compiled is not None and c.compiled.translation_source
                                else {}
                            ),
                        }
                        for c in it.candidates
                    ],
                    "selected": it.selected,
                    "feedback": it.feedback,
                }
                for it in self.iterations
            ],
            "final_rule": final_rule,
            "final_program": translation,
            "predictions": [render_prediction(p) for p in self.unseen_predictions],
            "a_tau": self.a_tau,
            "api_calls": self.ledger.api_calls,
            "tokens": self.ledger.prompt_tokens + self.ledger.completion_tokens,
            "prompt_tokens": self.ledger.prompt_tokens,
            "completion_tokens": self.ledger.completion_tokens,
            "cost": round(self.ledger.estimated_cost, 10),
            "error": self.error,
        }
        if self.a_tau_ood is not None:
            rec["a_tau_ood"] = self.a_tau_ood
        return rec

    def to_json(self) -> str:
        return json.dumps(self.to_record(), ensure_ascii=False)


# ---------------------------------------------------------------------------
# Interpreters
# ---------------------------------------------------------------------------


def symbolic_interpreter(kind: TaskKind, translator=None):
    kind = TaskKind(kind)
    if kind is TaskKind.ACRE:
        return BlicketInterpreter()
    if kind is TaskKind.MINISCAN:
        return QcfgInterpreter()
    return ProgramInterpreter(kind, translator)


_GRID_ROWS = re.compile(r"(?:\[[\d,\s]*\]\s*)+")
_INT_LIST = re.compile(r"\[[^\[\]]*\]")
_LABEL = re.compile(r"\b(" + "|".join(LABELS) + r")\b", re.IGNORECASE)
_OUTPUT_MARK = re.compile(r"Output\s*:", re.IGNORECASE)


def parse_lenient(text: str, kind: TaskKind) -> Prediction:
    """First value of the task's output kind found in an LM reply."""
    kind = TaskKind(kind)
    want = OUTPUT_KIND[kind]
    marks = list(_OUTPUT_MARK.finditer(text))
    body = text[marks[-1].end():] if marks else text
    if want is ValueKind.LABEL:
        m = _LABEL.search(body) or _LABEL.search(text)
        return Value.label(m.group(1).lower()) if m else Failure("parse", "no label in reply")
    if want is ValueKind.INTS:
        for m in _INT_LIST.finditer(body):
            try:
                return parse_value(m.group(0), kind, "out")
            except FormatError:
                continue
        return Failure("parse", "no integer list in reply")
    if want is ValueKind.GRID:
        stripped = body.strip()
        if stripped.startswith("[["):
            end = stripped.find("]]")
            try:
                return parse_value(stripped[: end + 2], kind, "out")
            except (FormatError, ValueError):
                pass
        for m in _GRID_ROWS.finditer(body):
            try:
                return parse_value(m.group(0), kind, "out")
            except (FormatError, ValueError):
                continue
        return Failure("parse", "no grid in reply")
    for line in body.splitlines():
        line = line.strip().strip("`\"'")
        if line:
            return Value.tokens(line)
    return Failure("parse", "empty reply")


def lm_apply(rule_text: str, x: Value, client: LmClient, kind: TaskKind, templates=None) -> Prediction:
    """Ask the LM to apply ``rule_text`` to ``x`` (greedy, one call)."""
    prompt = PromptBuilder(kind, templates).application(rule_text, x)
    try:
        text = client.complete(LmRequest(client.model, prompt, 0.0)).text
    except ProposerError as e:
        return Failure("transport", str(e))
    return parse_lenient(text, kind)


class LmInterpreter:
    """Uses the LM itself to apply rules, both for self-refine and for
    comparing LM rule application against the symbolic interpreters."""

    def __init__(self, client: LmClient, kind: TaskKind, templates=None):
        self.client = client
        self.kind = TaskKind(kind)
        self.templates = templates

    def compile(self, h: Hypothesis) -> CompiledRule:
        if h.payload is None:
            raise CompileFailure(h.error or "ill-formed hypothesis")
        rule = h.payload
        return CompiledRule(h, lambda x: lm_apply(rule, x, self.client, self.kind, self.templates))


# ---------------------------------------------------------------------------
# Scoring, selection, feedback
# ---------------------------------------------------------------------------


def task_accuracy(predictions: Sequence[Prediction], examples: Sequence[Example]) -> float:
    if len(predictions) != len(examples):
        raise ValueError(f"{len(predictions)} predictions for {len(examples)} examples")
    if not examples:
        raise ValueError("no examples to score")
    return sum(1 for p, ex in zip(predictions, examples) if values_equal(p, ex.output)) / len(examples)


def score(h: Hypothesis, task: Task, interpreter) -> ScoredHypothesis:
    try:
        compiled = interpreter.compile(h)
    except CompileFailure as e:
        fail = Failure("compile", str(e))
        return ScoredHypothesis(h, None, 0.0, [(fail, False)] * len(task.seen), compile_error=str(e))
    preds = []
    for ex in task.seen:
        p = compiled.apply(ex.input)
        preds.append((p, values_equal(p, ex.output)))
    n_ok = sum(1 for _, ok in preds if ok)
    return ScoredHypothesis(h, compiled, n_ok / len(task.seen), preds)


def select_best(candidates: Sequence[ScoredHypothesis]) -> int:
    if not candidates:
        raise ValueError("no candidates")
    best = 0
    for i, c in enumerate(candidates):
        b = candidates[best]
        if c.score > b.score or (c.score == b.score and c.hypothesis.sample_index < b.hypothesis.sample_index):
            best = i
    return best


def make_feedback(best: ScoredHypothesis, task: Task) -> str:
    blocks = []
    for ex, (pred, ok) in zip(task.seen, best.predictions):
        if not ok:
            blocks.append(
                f"Input: {format_value(ex.input)}\n"
                f"Expected output: {format_value(ex.output)}\n"
                f"Actual output: {format_value(pred)}"
            )
    return "\n\n".join(blocks)


def _rule_text(h: Hypothesis) -> str:
    return h.payload if h.payload is not None else h.raw_text.strip()


def _evaluate(rule: Optional[CompiledRule], examples: Sequence[Example]) -> tuple:
    if rule is None:
        preds = [Failure("compile", "no usable rule")] * len(examples)
    else:
        preds = [rule.apply(ex.input) for ex in examples]
    return preds, task_accuracy(preds, examples)


# ---------------------------------------------------------------------------
# Methods
# ---------------------------------------------------------------------------


def _loop(task: Task, cfg: RunConfig, client: LmClient, interpreter, templates=None) -> RunTrace:
    trace = RunTrace(task.id, task.kind, cfg, ledger=client.ledger)
    builder = PromptBuilder(task.kind, templates, noisy=cfg.noisy_prompt, form=cfg.hypothesis_form)
    form = cfg.hypothesis_form if task.kind in (TaskKind.LISTFN, TaskKind.MINIARC) else None
    best_overall: Optional[ScoredHypothesis] = None
    carried: Optional[ScoredHypothesis] = None
    carried_feedback = ""
    for t in range(1, cfg.max_iterations + 1):
        if t == 1:
            prompt = builder.generation(task.seen)
        else:
            prompt = builder.refinement(task.seen, _rule_text(carried.hypothesis), carried_feedback)
        texts = propose(client, prompt, cfg.samples_per_iteration, cfg.temperature, cfg.seed)
        cands = [score(extract_rule(text, task.kind, form, t, i), task, interpreter) for i, text in enumerate(texts)]
        sel = select_best(cands)
        chosen = cands[sel]
        if best_overall is None or chosen.score > best_overall.score:
            best_overall = chosen
        last = chosen.score == 1.0 or t == cfg.max_iterations
        feedback = "" if chosen.score == 1.0 else (None if last else make_feedback(chosen, task))
        trace.iterations.append(IterationRecord(t, cands, sel, feedback))
        if last:
            break
        carried = best_overall if cfg.carry_best else chosen
        carried_feedback = feedback if carried is chosen else make_feedback(carried, task)
    trace.final = best_overall
    return trace


def _finish(trace: RunTrace, task: Task, rule_for_eval: Optional[CompiledRule]) -> RunTrace:
    trace.unseen_predictions, trace.a_tau = _evaluate(rule_for_eval, task.unseen)
    if task.ood:
        trace.ood_predictions, trace.a_tau_ood = _evaluate(rule_for_eval, task.ood)
    return trace


def _eval_rule(trace: RunTrace, interpreter) -> Optional[CompiledRule]:
    if trace.final is None or trace.final.hypothesis.payload is None:
        return None
    if interpreter is None:
        return trace.final.compiled
    try:
        return interpreter.compile(trace.final.hypothesis)
    except CompileFailure:
        return None


def refine(task: Task, cfg: RunConfig, client: LmClient, interpreter=None, templates=None) -> RunTrace:
    """Iterative hypothesis refinement with a symbolic interpreter.

    With ``cfg.interpreter_mode == "lm"`` the search is unchanged but the
    final rule is applied to unseen inputs by the LM.
    """
    if interpreter is None:
        interpreter = symbolic_interpreter(task.kind, LmTranslator(client, templates))
    trace = _loop(task, cfg, client, interpreter, templates)
    eval_interp = LmInterpreter(client, task.kind, templates) if cfg.interpreter_mode == "lm" else None
    return _finish(trace, task, _eval_rule(trace, eval_interp))


def sr_refine(task: Task, cfg: RunConfig, client: LmClient, templates=None) -> RunTrace:
    """Self-refine: the same loop, with the LM standing in for the interpreter
    both while scoring and on unseen inputs."""
    interp = LmInterpreter(client, task.kind, templates)
    trace = _loop(task, dataclasses.replace(cfg, interpreter_mode="lm"), client, interp, templates)
    return _finish(trace, task, _eval_rule(trace, None))


def io_predict(task: Task, cfg: RunConfig, client: LmClient, templates=None) -> RunTrace:
    trace = RunTrace(task.id, task.kind, cfg, ledger=client.ledger)
    builder = PromptBuilder(task.kind, templates, noisy=cfg.noisy_prompt)

    def predict(x: Value) -> Prediction:
        text = client.complete(LmRequest(client.model, builder.io(task.seen, x), 0.0, seed=cfg.seed)).text
        return parse_lenient(text, task.kind)

    trace.unseen_predictions = [predict(ex.input) for ex in task.unseen]
    trace.a_tau = task_accuracy(trace.unseen_predictions, task.unseen)
    if task.ood:
        trace.ood_predictions = [predict(ex.input) for ex in task.ood]
        trace.a_tau_ood = task_accuracy(trace.ood_predictions, task.ood)
    return trace


def majority_vote(predictions: Sequence[Prediction]) -> Prediction:
    """Most common rendered value; ties go to the value sampled first.
    Failures only win when every sample failed."""
    valid = [p for p in predictions if isinstance(p, Value)]
    if not valid:
        return predictions[0] if predictions else Failure("parse", "no samples")
    keys = [render_prediction(p) for p in valid]
    counts = Counter(keys)
    top = max(counts.values())
    for p, k in zip(valid, keys):
        if counts[k] == top:
            return p
    raise AssertionError("unreachable")  # pragma: no cover


def sc_predict(task: Task, cfg: RunConfig, client: LmClient, templates=None) -> RunTrace:
    trace = RunTrace(task.id, task.kind, cfg, ledger=client.ledger)
    builder = PromptBuilder(task.kind, templates, noisy=cfg.noisy_prompt)
    n = cfg.samples_per_iteration

    def predict(x: Value) -> Prediction:
        texts = propose(client, builder.io(task.seen, x), n, cfg.temperature, cfg.seed)
        return majority_vote([parse_lenient(t, task.kind) for t in texts])

    trace.unseen_predictions = [predict(ex.input) for ex in task.unseen]
    trace.a_tau = task_accuracy(trace.unseen_predictions, task.unseen)
    if task.ood:
        trace.ood_predictions = [predict(ex.input) for ex in task.ood]
        trace.a_tau_ood = task_accuracy(trace.ood_predictions, task.ood)
    return trace


METHODS = {Method.REFINE: refine, Method.SR: sr_refine, Method.IO: io_predict, Method.SC: sc_predict}


def run_task(task: Task, cfg: RunConfig, client: LmClient, templates=None) -> RunTrace:
    """Run one task with the configured method. Proposer failures end the
    task with an error trace instead of propagating."""
    try:
        return METHODS[cfg.method](task, cfg, client, templates=templates)
    except ProposerError as e:
        return RunTrace(task.id, task.kind, cfg, ledger=client.ledger, error=f"{type(e).__name__}: {e}")

"""List Functions / MiniARC interpreter.

Natural-language hypotheses go through one translation request into the
sandbox language; program-form hypotheses are parsed directly and never
touch the LM.
"""

from __future__ import annotations

import re
from typing import Optional, Protocol

from .core import (
    OUTPUT_KIND,
    CompileFailure,
    CompiledRule,
    Hypothesis,
    HypothesisForm,
    RuleApplicationFailure,
    TaskKind,
    Value,
)
from .sandbox import Limits, Program, SandboxSyntaxError, eval_program, parse_program

_FENCE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)
_INLINE = re.compile(r"`([^`\n]+)`")
_LEAD = re.compile(r"^\s*(?:Rule|Program)\s*:\s*", re.IGNORECASE)


class Translator(Protocol):
    def translate(self, rule_text: str, kind: TaskKind) -> str: ...


def program_candidates(text: str) -> list:
    cands = [m.group(1).strip() for m in _FENCE.finditer(text)]
    stripped = _LEAD.sub("", text.strip(), count=1).strip()
    cands.append(stripped)
    cands.extend(m.group(1).strip() for m in _INLINE.finditer(text))
    lines = [_LEAD.sub("", ln).strip() for ln in text.splitlines() if ln.strip()]
    cands.extend(lines)
    return [c for c in cands if c]


def extract_program(text: str) -> Program:
    """First parseable program in ``text``: fenced blocks, then the bare text,
    then inline code spans, then single lines."""
    first_error: Optional[CompileFailure] = None
    for cand in program_candidates(text):
        try:
            return parse_program(cand)
        except SandboxSyntaxError as e:
            first_error = first_error or e
    if first_error is None:
        raise CompileFailure("no program found in text")
    raise first_error


def _executable(program: Program, kind: TaskKind, limits: Limits):
    want = OUTPUT_KIND[kind]

    def run(value: Value) -> Value:
        out = eval_program(program, value, limits)
        if out.kind is not want:
            raise RuleApplicationFailure(f"program returned a {out.kind.value}, expected {want.value}")
        return out

    return run


def compile_hypothesis(
    h: Hypothesis,
    kind: TaskKind,
    translator: Optional[Translator] = None,
    limits: Limits = Limits(),
) -> CompiledRule:
    kind = TaskKind(kind)
    if kind not in (TaskKind.LISTFN, TaskKind.MINIARC):
        raise ValueError(f"program interpreter does not handle {kind.value}")
    if h.payload is None:
        raise CompileFailure(h.error or "ill-formed hypothesis")
    if h.form is HypothesisForm.PROGRAM:
        program = extract_program(h.payload)
        return CompiledRule(h, _executable(program, kind, limits))
    if h.form is not HypothesisForm.NATURAL_LANGUAGE:
        raise CompileFailure(f"cannot compile a {h.form.value} hypothesis into a program")
    if translator is None:
        raise CompileFailure("natural-language hypothesis needs a translator")
    response = translator.translate(h.payload, kind)
    program = extract_program(response)
    return CompiledRule(h, _executable(program, kind, limits), translation_source=program.source)


class ProgramInterpreter:
    def __init__(self, kind: TaskKind, translator: Optional[Translator] = None, limits: Limits = Limits()):
        self.kind = TaskKind(kind)
        self.translator = translator
        self.limits = limits

    def compile(self, h: Hypothesis) -> CompiledRule:
        return compile_hypothesis(h, self.kind, self.translator, self.limits)


def apply(rule: CompiledRule, value: Value):
    return rule.apply(value)

"""Pull the rule payload out of free-form proposer text."""

from __future__ import annotations

import re
from typing import Optional

from ..blicket import first_balanced_object
from ..core import Hypothesis, HypothesisForm, TaskKind

_RULE_MARK = re.compile(r"\bRule\s*:", re.IGNORECASE)
_GRAMMAR_LINE = re.compile(r"^\s*(?:Rule|Priority)\s*\d+\s*:.*$", re.IGNORECASE | re.MULTILINE)
_FENCE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)


def _after_marker(text: str) -> Optional[str]:
    m = _RULE_MARK.search(text)
    return None if m is None else text[m.end():]


def extract_rule(
    text: str,
    kind: TaskKind,
    form: Optional[HypothesisForm] = None,
    iteration: int = 1,
    sample_index: int = 0,
) -> Hypothesis:
    """Build a :class:`Hypothesis` from raw proposer output.

    On failure the hypothesis keeps ``payload=None`` and an ``error`` note;
    it then scores 0 like any rule that cannot be compiled.
    """
    kind = TaskKind(kind)

    def bad(f: HypothesisForm, why: str) -> Hypothesis:
        return Hypothesis(text, None, f, iteration, sample_index, error=why)

    def ok(f: HypothesisForm, payload: str) -> Hypothesis:
        return Hypothesis(text, payload, f, iteration, sample_index)

    if kind is TaskKind.ACRE:
        rest = _after_marker(text)
        if rest is None:
            return bad(HypothesisForm.BLICKET_MAP, "no 'Rule:' marker")
        obj = first_balanced_object(rest)
        if obj is None:
            return bad(HypothesisForm.BLICKET_MAP, "no {...} object after 'Rule:'")
        return ok(HypothesisForm.BLICKET_MAP, obj)

    if kind is TaskKind.MINISCAN:
        lines = [m.group(0).strip() for m in _GRAMMAR_LINE.finditer(text)]
        if not any(ln.lower().startswith("rule") for ln in lines):
            return bad(HypothesisForm.GRAMMAR, "no 'Rule <k>:' lines")
        return ok(HypothesisForm.GRAMMAR, "\n".join(lines))

    fence = _FENCE.search(text)
    if form is None:
        form = HypothesisForm.PROGRAM if fence else HypothesisForm.NATURAL_LANGUAGE
    form = HypothesisForm(form)
    if form is HypothesisForm.PROGRAM:
        if fence and fence.group(1).strip():
            return ok(form, fence.group(1).strip())
        rest = _after_marker(text)
        if rest is None or not rest.strip():
            return bad(form, "no fenced program block or 'Rule:' marker")
        return ok(form, rest.strip())
    rest = _after_marker(text)
    if rest is None:
        return bad(form, "no 'Rule:' marker")
    if not rest.strip():
        return bad(form, "empty rule after 'Rule:'")
    return ok(form, rest.strip())

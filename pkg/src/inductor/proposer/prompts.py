"""Prompt templates and per-dataset placeholder values.

Templates live as editable text files (``inductor/prompts/*.txt``); a
directory passed to :func:`load_templates` overrides any of them by name.
Placeholders are written ``{Task description}``, ``{Examples}`` and so on.
Description placeholders are bound with a leading space so that an empty
description leaves no stray whitespace.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional, Sequence

from ..core import Example, HypothesisForm, TaskKind, Value, ValueKind, render_prediction
from ..sandbox import language_reference

TEMPLATE_NAMES = (
    "hypothesis_generation",
    "hypothesis_refinement",
    "hypothesis_translation",
    "rule_application",
    "io_prediction",
)

_PLACEHOLDER = re.compile(r"\{([A-Z][a-z]*(?: [a-z]+)*)\}")


class PromptError(KeyError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str

    @property
    def placeholders(self) -> tuple:
        return tuple(dict.fromkeys(_PLACEHOLDER.findall(self.body)))


def render_prompt(t: PromptTemplate, bindings: Mapping[str, str]) -> str:
    missing = [p for p in t.placeholders if p not in bindings]
    if missing:
        raise PromptError(f"template {t.name!r} has unbound placeholders: {', '.join(missing)}")
    return _PLACEHOLDER.sub(lambda m: bindings[m.group(1)], t.body)


def load_templates(override_dir: Optional[Path] = None) -> dict:
    pkg = resources.files("inductor").joinpath("prompts")
    out = {}
    for name in TEMPLATE_NAMES:
        body = None
        if override_dir is not None:
            p = Path(override_dir) / f"{name}.txt"
            if p.exists():
                body = p.read_text(encoding="utf-8")
        if body is None:
            body = pkg.joinpath(f"{name}.txt").read_text(encoding="utf-8")
        if body.endswith("\n"):
            body = body[:-1]
        out[name] = PromptTemplate(name, body)
    return out


NOISY_NOTE = (
    "Note that some examples may be noisy, and you should take this into account when proposing the rule."
)

TASK_DESCRIPTIONS = {
    TaskKind.ACRE: (
        "Each example is an input-output pair. The input is a list of objects. The presence of certain "
        "objects will trigger the light to turn on. The output is either \"on\" or \"off\", indicating "
        "the state of the light. For each object, determine whether it triggers the light to turn on, "
        "does not trigger it, or if it's undetermined."
    ),
    TaskKind.MINISCAN: (
        "Your grammar rules should follow the format \"<input> -> <output>\". Use the prefix \"##\" to "
        "denote a nonterminal symbol. For instance, \"##A twice -> ##A ##A\". The left-hand side cannot "
        "contain repetitive nonterminal symbols; i.e., rules like \"##A ##A -> ##A twice\" or "
        "\"##A and ##A -> ##A twice\" are not allowed. Ensure that the number of unique nonterminal "
        "symbols on the left-hand side matches that on the right-hand side in your rules. For each rule, "
        "assign an integer as its priority. A higher priority indicates that the rule should be "
        "considered first when generating parses. Try to make your rules as minimal as possible."
    ),
    TaskKind.LISTFN: "",
    TaskKind.MINIARC: "",
}

EXAMPLE_DESCRIPTIONS = {
    TaskKind.ACRE: (
        "Each example is an input-output pair. The input is a list of objects. The presence of certain "
        "objects will trigger the light to turn on. The output is either \"on\", \"off\", or "
        "\"undetermined\", indicating the state of the light or if the state of the light cannot be "
        "determined. The rule indicates whether each object triggers the light to turn on, does not "
        "trigger it, or if it's undetermined."
    ),
    TaskKind.MINISCAN: (
        "The grammar rules follow the format \"<input> -> <output>\". The \"##\" prefix denotes a "
        "nonterminal symbol. For instance, ##A twice -> ##A ##A. Each rule has an associated priority. "
        "A higher priority indicates that the rule should be considered first when generating parses. "
        "The output is a sequence of tokens joined by spaces."
    ),
    TaskKind.LISTFN: "The input is a list of integers. The output is also a list of integers.",
    TaskKind.MINIARC: "The input is a 2D grid of integers. The output is also a 2D grid of integers.",
}

RULE_FORMATS = {
    TaskKind.ACRE: (
        '{"object 1": <"on"/"off"/"undetermined">, "object 2": <"on"/"off"/"undetermined">, ...}'
    ),
    TaskKind.MINISCAN: "Rule 1: <Your rule>\nPriority 1: <Your priority>\n...",
    TaskKind.LISTFN: "",
    TaskKind.MINIARC: "",
}

PROGRAM_RULE_FORMAT = "<a program in the sandbox language, inside a fenced code block>"


def _lead(text: str) -> str:
    return " " + text if text else ""


def format_value(v: Value) -> str:
    """Value as it follows ``Input: `` in a prompt; grids start on a new line."""
    text = render_prediction(v)
    return "\n" + text if isinstance(v, Value) and v.kind is ValueKind.GRID else text


def format_examples(examples: Sequence[Example]) -> str:
    return "\n\n".join(f"Input: {format_value(e.input)}\nOutput: {format_value(e.output)}" for e in examples)


class PromptBuilder:
    """Renders the five prompt families for one dataset kind."""

    def __init__(
        self,
        kind: TaskKind,
        templates: Optional[Mapping[str, PromptTemplate]] = None,
        noisy: bool = False,
        form: HypothesisForm = HypothesisForm.NATURAL_LANGUAGE,
    ):
        self.kind = TaskKind(kind)
        self.templates = dict(templates or load_templates())
        self.noisy = noisy
        self.form = HypothesisForm(form)

    @property
    def program_form(self) -> bool:
        return self.form is HypothesisForm.PROGRAM and self.kind in (TaskKind.LISTFN, TaskKind.MINIARC)

    def _task_description(self) -> str:
        parts = [TASK_DESCRIPTIONS[self.kind]]
        if self.noisy:
            parts.append(NOISY_NOTE)
        if self.program_form:
            parts.append(
                "Write the rule as a program in the sandbox language described below.\n\n" + language_reference()
            )
        return _lead(" ".join(p for p in parts if p))

    def _rule_format(self) -> str:
        return PROGRAM_RULE_FORMAT if self.program_form else RULE_FORMATS[self.kind]

    def generation(self, examples: Sequence[Example]) -> str:
        return render_prompt(
            self.templates["hypothesis_generation"],
            {
                "Task description": self._task_description(),
                "Examples": format_examples(examples),
                "Rule format": self._rule_format(),
            },
        )

    def refinement(self, examples: Sequence[Example], rule: str, feedback: str) -> str:
        """The generation prompt followed by the refinement request, so a single
        message carries the exemplars, the previous rule and the feedback."""
        block = render_prompt(
            self.templates["hypothesis_refinement"],
            {
                "Rule": rule,
                "Feedback": feedback,
                "Feedback description": _lead(NOISY_NOTE if self.noisy else ""),
                "Rule format": self._rule_format(),
            },
        )
        return self.generation(examples) + "\n\n" + block

    def translation(self, rule: str) -> str:
        return render_prompt(
            self.templates["hypothesis_translation"],
            {
                "Example description": _lead(EXAMPLE_DESCRIPTIONS[self.kind]),
                "Rule": rule,
                "Language reference": language_reference(),
            },
        )

    def application(self, rule: str, x: Value) -> str:
        return render_prompt(
            self.templates["rule_application"],
            {"Example description": _lead(EXAMPLE_DESCRIPTIONS[self.kind]), "Rule": rule, "Test input": format_value(x)},
        )

    def io(self, examples: Sequence[Example], x: Value) -> str:
        return render_prompt(
            self.templates["io_prediction"],
            {
                "Example description": _lead(EXAMPLE_DESCRIPTIONS[self.kind]),
                "Examples": format_examples(examples),
                "Test input": format_value(x),
            },
        )

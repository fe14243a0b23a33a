"""ACRE interpreter: a rule labels each object on/off/undetermined and the light
state for a set of presented objects follows from those labels."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Mapping, Optional

from .core import LABELS, CompileFailure, CompiledRule, Hypothesis, Task, Value


class BlicketParseError(CompileFailure):
    pass


def normalize_object(name: str) -> str:
    return " ".join(name.split()).lower()


@dataclass(frozen=True)
class BlicketRule:
    labels: Mapping[str, str]

    def __post_init__(self):
        norm = {}
        for k, v in dict(self.labels).items():
            label = str(v).strip().lower()
            if label not in LABELS:
                raise BlicketParseError(f"label {v!r} for {k!r} is not one of {LABELS}")
            norm[normalize_object(k)] = label
        object.__setattr__(self, "labels", norm)

    def __hash__(self):
        return hash(tuple(sorted(self.labels.items())))


def first_balanced_object(text: str) -> Optional[str]:
    """Return the first balanced ``{...}`` substring, respecting JSON strings."""
    start = text.find("{")
    while start != -1:
        depth = 0
        in_str = False
        escape = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_str:
                if escape:
                    escape = False
                elif ch == "\\":
                    escape = True
                elif ch == '"':
                    in_str = False
            elif ch == '"':
                in_str = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    return text[start:i + 1]
        start = text.find("{", start + 1)
    return None


def parse_blicket_rule(payload: str) -> BlicketRule:
    block = first_balanced_object(payload)
    if block is None:
        raise BlicketParseError("no balanced {...} object found in rule text")
    try:
        obj = json.loads(block)
    except json.JSONDecodeError as e:
        raise BlicketParseError(f"rule object is not valid JSON: {e.msg}") from None
    if not isinstance(obj, dict):
        raise BlicketParseError("rule must be a JSON object")
    return BlicketRule(obj)


def apply_blicket(rule: BlicketRule, objects: Value) -> Value:
    # precedence: on > undetermined > off; objects missing from the rule are undetermined
    seen_undetermined = False
    for obj in objects.data:
        label = rule.labels.get(normalize_object(obj), "undetermined")
        if label == "on":
            return Value.label("on")
        if label == "undetermined":
            seen_undetermined = True
    return Value.label("undetermined" if seen_undetermined else "off")


class BlicketInterpreter:
    def compile(self, h: Hypothesis) -> CompiledRule:
        if h.payload is None:
            raise CompileFailure(h.error or "ill-formed hypothesis")
        rule = parse_blicket_rule(h.payload)
        return CompiledRule(h, lambda v: apply_blicket(rule, v))


def consistent_assignment_exists(task: Task) -> bool:
    """Check whether some on/off labelling of the objects explains every seen
    example under the on > undetermined > off reading.

    Used by the loader to flag tasks whose ground truth disagrees with the
    chosen precedence. Brute force over objects; ACRE vocabularies are small.
    """
    objs = sorted({normalize_object(o) for ex in task.seen for o in ex.input.data})
    if len(objs) > 8:
        return True
    for bits in itertools.product(LABELS, repeat=len(objs)):
        rule = BlicketRule(dict(zip(objs, bits)))
        if all(apply_blicket(rule, ex.input).data == ex.output.data for ex in task.seen):
            return True
    return False


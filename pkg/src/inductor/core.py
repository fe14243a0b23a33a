"""Shared data model: values, examples, tasks, hypotheses and run configuration.

Every interpreter and the refinement engine speak in terms of :class:`Value`.
Values are immutable and compare structurally; equality of
:func:`normalize_output` results is the single correctness test used by
scoring and evaluation.
"""

from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional, Sequence, Union

LABELS = ("on", "off", "undetermined")


class FormatError(ValueError):
    """Malformed serialized value. ``position`` is a 0-based character offset."""

    def __init__(self, message: str, position: int = 0):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ValueKind(str, Enum):
    TOKENS = "tokens"
    INTS = "ints"
    GRID = "grid"
    LABEL = "label"
    OBJECTS = "objects"


class TaskKind(str, Enum):
    ACRE = "acre"
    MINISCAN = "miniscan"
    LISTFN = "listfn"
    MINIARC = "miniarc"


INPUT_KIND = {
    TaskKind.ACRE: ValueKind.OBJECTS,
    TaskKind.MINISCAN: ValueKind.TOKENS,
    TaskKind.LISTFN: ValueKind.INTS,
    TaskKind.MINIARC: ValueKind.GRID,
}
OUTPUT_KIND = {
    TaskKind.ACRE: ValueKind.LABEL,
    TaskKind.MINISCAN: ValueKind.TOKENS,
    TaskKind.LISTFN: ValueKind.INTS,
    TaskKind.MINIARC: ValueKind.GRID,
}

# (seen, unseen) per kind
DEFAULT_COUNTS = {
    TaskKind.ACRE: (6, 4),
    TaskKind.MINISCAN: (14, 10),
    TaskKind.LISTFN: (8, 8),
    TaskKind.MINIARC: (3, 3),
}


def _is_int(x: Any) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


@dataclass(frozen=True)
class Value:
    """A task input or output.

    ``data`` layout by kind: TOKENS and OBJECTS are tuples of str, INTS a tuple
    of int, GRID a tuple of row tuples, LABEL a str.  Token values may carry
    stray whitespace until normalized.
    """

    kind: ValueKind
    data: Any

    def __post_init__(self):
        kind, data = self.kind, self.data
        if kind is ValueKind.INTS:
            if not isinstance(data, tuple) or not all(_is_int(x) for x in data):
                raise TypeError("IntList must be a tuple of ints")
        elif kind is ValueKind.GRID:
            if not isinstance(data, tuple) or not data:
                raise ValueError("IntGrid needs at least one row")
            width = len(data[0])
            if width == 0:
                raise ValueError("IntGrid rows must be non-empty")
            for r, row in enumerate(data):
                if not isinstance(row, tuple) or len(row) != width:
                    raise ValueError(f"IntGrid row {r} has length {len(row)}, expected {width}")
                for c in row:
                    if not _is_int(c) or not 0 <= c <= 9:
                        raise ValueError(f"IntGrid cell {c!r} outside 0-9")
        elif kind is ValueKind.LABEL:
            if not isinstance(data, str) or data.strip().lower() not in LABELS:
                raise ValueError(f"label must be one of {LABELS}, got {data!r}")
        elif kind in (ValueKind.TOKENS, ValueKind.OBJECTS):
            if not isinstance(data, tuple) or not all(isinstance(t, str) and t.strip() for t in data):
                raise ValueError(f"{kind.value} must be a tuple of non-empty strings")
        else:  # pragma: no cover
            raise TypeError(f"unknown value kind {kind!r}")

    @classmethod
    def tokens(cls, toks: Union[str, Sequence[str]]) -> "Value":
        if isinstance(toks, str):
            toks = toks.split()
        return cls(ValueKind.TOKENS, tuple(toks))

    @classmethod
    def ints(cls, xs: Sequence[int]) -> "Value":
        return cls(ValueKind.INTS, tuple(xs))

    @classmethod
    def grid(cls, rows: Sequence[Sequence[int]]) -> "Value":
        return cls(ValueKind.GRID, tuple(tuple(r) for r in rows))

    @classmethod
    def label(cls, s: str) -> "Value":
        return cls(ValueKind.LABEL, s)

    @classmethod
    def objects(cls, objs: Sequence[str]) -> "Value":
        return cls(ValueKind.OBJECTS, tuple(objs))

    def to_python(self) -> Any:
        """Plain JSON-able python form (lists, strings)."""
        if self.kind is ValueKind.GRID:
            return [list(r) for r in self.data]
        if self.kind in (ValueKind.INTS, ValueKind.OBJECTS):
            return list(self.data)
        if self.kind is ValueKind.TOKENS:
            return " ".join(self.data)
        return self.data

    def __str__(self) -> str:
        return render_value(self)


def normalize_output(v: Value) -> Value:
    if v.kind is ValueKind.TOKENS:
        return Value(v.kind, tuple(" ".join(v.data).split()))
    if v.kind is ValueKind.LABEL:
        return Value(v.kind, v.data.strip().lower())
    if v.kind is ValueKind.OBJECTS:
        return Value(v.kind, tuple(" ".join(o.split()).lower() for o in v.data))
    return v


def values_equal(a: Optional[Value], b: Optional[Value]) -> bool:
    if not isinstance(a, Value) or not isinstance(b, Value):
        return False
    return normalize_output(a) == normalize_output(b)


# ---------------------------------------------------------------------------
# Text rendering / parsing (prompt format)
# ---------------------------------------------------------------------------


def _render_list(xs: Sequence[int]) -> str:
    return "[" + ", ".join(str(x) for x in xs) + "]"


def render_value(v: Value) -> str:
    """Render in the prompt format. Grids are one bracketed row per line."""
    v = normalize_output(v)
    if v.kind is ValueKind.INTS:
        return _render_list(v.data)
    if v.kind is ValueKind.GRID:
        return "\n".join(_render_list(r) for r in v.data)
    if v.kind is ValueKind.TOKENS:
        return " ".join(v.data)
    if v.kind is ValueKind.OBJECTS:
        return ", ".join(v.data)
    return v.data


def _parse_int_list(text: str, offset: int = 0) -> tuple:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"not an integer list: {e.msg}", offset + e.pos) from None
    if not isinstance(obj, list) or not all(_is_int(x) for x in obj):
        raise FormatError("expected a list of integers", offset)
    return tuple(obj)


_ROW = re.compile(r"\[[^\[\]]*\]")


def _parse_grid(text: str) -> tuple:
    stripped = text.strip()
    if not stripped:
        raise FormatError("empty grid", 0)
    if stripped.startswith("[["):
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError as e:
            raise FormatError(f"not a grid: {e.msg}", text.index(stripped) + e.pos) from None
        if not isinstance(obj, list) or not all(isinstance(r, list) for r in obj):
            raise FormatError("expected a list of rows", 0)
        rows = []
        for r in obj:
            if not all(_is_int(x) for x in r):
                raise FormatError("grid cells must be integers", 0)
            rows.append(tuple(r))
        return tuple(rows)
    rows = []
    pos = 0
    for m in _ROW.finditer(text):
        gap = text[pos:m.start()]
        if gap.strip():
            raise FormatError("unexpected text between grid rows", pos + len(gap) - len(gap.lstrip()))
        rows.append(_parse_int_list(m.group(0), m.start()))
        pos = m.end()
    if text[pos:].strip():
        raise FormatError("unexpected trailing text after grid", pos)
    if not rows:
        raise FormatError("no grid rows found", 0)
    return tuple(rows)


def parse_value(text: str, kind: TaskKind, side: str) -> Value:
    """Parse ``text`` as the input (``side='in'``) or output (``'out'``) of a task kind."""
    kind = TaskKind(kind)
    if side not in ("in", "out"):
        raise ValueError("side must be 'in' or 'out'")
    vkind = INPUT_KIND[kind] if side == "in" else OUTPUT_KIND[kind]
    if not text.strip():
        raise FormatError(f"empty text for {vkind.value}", 0)
    try:
        if vkind is ValueKind.INTS:
            stripped = text.strip()
            return Value.ints(_parse_int_list(stripped, text.index(stripped)))
        if vkind is ValueKind.GRID:
            return Value.grid(_parse_grid(text))
        if vkind is ValueKind.TOKENS:
            return Value.tokens(text.split())
        if vkind is ValueKind.LABEL:
            label = text.strip().lower()
            if label not in LABELS:
                raise FormatError(f"unknown label {text.strip()!r}", text.index(text.strip()))
            return Value.label(label)
        objs = [o.strip() for o in text.split(",")]
        if any(not o for o in objs):
            raise FormatError("empty object description", 0)
        return Value.objects(objs)
    except (TypeError, ValueError) as e:
        if isinstance(e, FormatError):
            raise
        raise FormatError(str(e), 0) from None


# ---------------------------------------------------------------------------
# JSON task-file serialization
# ---------------------------------------------------------------------------


def value_to_json(v: Value) -> Any:
    return v.to_python()


def value_from_json(obj: Any, vkind: ValueKind) -> Value:
    if vkind is ValueKind.TOKENS:
        if not isinstance(obj, str):
            raise TypeError("token sequence must be a string")
        return Value.tokens(obj)
    if vkind is ValueKind.LABEL:
        if not isinstance(obj, str):
            raise TypeError("label must be a string")
        return Value.label(obj.strip().lower())
    if vkind is ValueKind.GRID:
        if not isinstance(obj, list) or not all(isinstance(r, list) for r in obj):
            raise TypeError("grid must be a list of lists")
        return Value.grid(obj)
    if not isinstance(obj, list):
        raise TypeError(f"{vkind.value} must be a JSON array")
    if vkind is ValueKind.INTS:
        return Value.ints(obj)
    return Value.objects(obj)


# ---------------------------------------------------------------------------
# Tasks and hypotheses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Example:
    input: Value
    output: Value


@dataclass(frozen=True)
class Task:
    id: str
    kind: TaskKind
    seen: tuple
    unseen: tuple
    ood: Optional[tuple] = None
    truth_program: Optional[str] = None
    noisy_flag: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", TaskKind(self.kind))
        object.__setattr__(self, "seen", tuple(self.seen))
        object.__setattr__(self, "unseen", tuple(self.unseen))
        if self.ood is not None:
            object.__setattr__(self, "ood", tuple(self.ood))
        if not self.seen:
            raise ValueError(f"task {self.id}: seen examples must be non-empty")
        if not self.unseen:
            raise ValueError(f"task {self.id}: unseen examples must be non-empty")
        want_in, want_out = INPUT_KIND[self.kind], OUTPUT_KIND[self.kind]
        for split in (self.seen, self.unseen, self.ood or ()):
            for ex in split:
                if ex.input.kind is not want_in or ex.output.kind is not want_out:
                    raise ValueError(
                        f"task {self.id}: example kinds {ex.input.kind.value}->{ex.output.kind.value} "
                        f"do not match {self.kind.value}"
                    )

    def replace(self, **changes) -> "Task":
        return dataclasses.replace(self, **changes)

    def to_json(self) -> dict:
        def exs(split):
            return [{"input": value_to_json(e.input), "output": value_to_json(e.output)} for e in split]

        out = {"id": self.id, "kind": self.kind.value, "seen": exs(self.seen), "unseen": exs(self.unseen)}
        if self.ood is not None:
            out["ood"] = exs(self.ood)
        if self.truth_program is not None:
            out["truth_program"] = self.truth_program
        if self.noisy_flag:
            out["noisy"] = True
        return out


class HypothesisForm(str, Enum):
    NATURAL_LANGUAGE = "natural_language"
    PROGRAM = "program"
    GRAMMAR = "grammar"
    BLICKET_MAP = "blicket_map"


@dataclass(frozen=True)
class Hypothesis:
    raw_text: str
    payload: Optional[str]
    form: HypothesisForm
    iteration: int = 1
    sample_index: int = 0
    error: Optional[str] = None  # set when extraction failed (ill-formed)

    @property
    def ill_formed(self) -> bool:
        return self.payload is None


class Method(str, Enum):
    IO = "io"
    SC = "sc"
    SR = "sr"
    REFINE = "refine"


@dataclass(frozen=True)
class RunConfig:
    method: Method = Method.REFINE
    max_iterations: int = 3
    samples_per_iteration: int = 5
    temperature_multi: float = 0.7
    interpreter_mode: str = "symbolic"
    seed: int = 0
    model_name: str = "scripted"
    noisy_prompt: bool = False
    carry_best: bool = True
    hypothesis_form: HypothesisForm = HypothesisForm.NATURAL_LANGUAGE

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "hypothesis_form", HypothesisForm(self.hypothesis_form))
        if self.max_iterations < 1 or self.samples_per_iteration < 1:
            raise ValueError("max_iterations and samples_per_iteration must be >= 1")
        if self.interpreter_mode not in ("symbolic", "lm"):
            raise ValueError("interpreter_mode must be 'symbolic' or 'lm'")

    @property
    def temperature(self) -> float:
        return 0.0 if self.samples_per_iteration == 1 else self.temperature_multi


# ---------------------------------------------------------------------------
# Compiled rules and failures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Failure:
    """A prediction that could not be produced. Always scored as incorrect."""

    stage: str  # compile | apply | parse | transport
    reason: str

    def __str__(self) -> str:
        return "None"


class CompileFailure(Exception):
    """A hypothesis could not be turned into an executable rule."""


class RuleApplicationFailure(Exception):
    """A compiled rule failed on a particular input."""


Prediction = Union[Value, Failure]


@dataclass(frozen=True)
class CompiledRule:
    origin: Hypothesis
    executable: Callable[[Value], Value] = field(compare=False)
    translation_source: Optional[str] = None

    def apply(self, value: Value) -> Prediction:
        try:
            out = self.executable(value)
        except RuleApplicationFailure as e:
            return Failure("apply", str(e))
        if isinstance(out, Failure):
            return out
        return normalize_output(out)


def render_prediction(p: Prediction) -> str:
    return "None" if isinstance(p, Failure) else render_value(p)

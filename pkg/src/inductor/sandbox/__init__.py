"""A small pure functional language over integers, integer lists and grids.

List Functions and MiniARC hypotheses are executed here instead of in a
general-purpose host language: there is no I/O, no clock, no environment
access, and every evaluation is bounded by :class:`Limits`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Optional

from ..core import Value, ValueKind
from .runtime import (
    BUILTINS,
    DepthExceeded,
    Grid,
    IndexOutOfBounds,
    Limits,
    Machine,
    OutputSizeExceeded,
    SandboxError,
    SandboxRuntimeError,
    SandboxTypeError,
    StepLimitExceeded,
    make_grid,
    type_name,
)
from .syntax import SandboxSyntaxError, UnknownIdentifierError, parse

__all__ = [
    "Program",
    "Limits",
    "parse_program",
    "eval_program",
    "run_raw",
    "language_reference",
    "SandboxError",
    "SandboxSyntaxError",
    "UnknownIdentifierError",
    "StepLimitExceeded",
    "DepthExceeded",
    "SandboxTypeError",
    "IndexOutOfBounds",
    "OutputSizeExceeded",
    "SandboxRuntimeError",
]


@dataclass(frozen=True)
class Program:
    source: str
    ast: Any = field(compare=False, repr=False)
    input_var: Optional[str] = None


def parse_program(source: str) -> Program:
    ast, input_var = parse(source, BUILTINS)
    return Program(source, ast, input_var)


def _to_runtime(v: Value):
    if v.kind is ValueKind.INTS:
        return "xs", tuple(v.data)
    if v.kind is ValueKind.GRID:
        return "g", Grid(tuple(v.data))
    raise SandboxTypeError(f"sandbox programs take lists or grids, not {v.kind.value}")


def _to_value(x) -> Value:
    if isinstance(x, Grid):
        return Value.grid(x.rows)
    if isinstance(x, tuple):
        if all(isinstance(e, int) and not isinstance(e, bool) for e in x):
            return Value.ints(x)
        if x and all(isinstance(e, tuple) for e in x):
            # rectangular list of rows is accepted as a grid
            return Value.grid(make_grid(x).rows)
    raise SandboxTypeError(f"program result must be an int list or a grid, got {type_name(x)}")


def run_raw(p: Program, arg, limits: Limits = Limits()):
    """Evaluate with a raw runtime argument (tuple or Grid) bound to the
    program's input variable. Returns the raw runtime result."""
    env = {}
    if p.input_var is not None:
        env[p.input_var] = arg
    return Machine(limits).eval(p.ast, env)


def eval_program(p: Program, input: Value, limits: Limits = Limits()) -> Value:
    name, arg = _to_runtime(input)
    if p.input_var is not None and p.input_var != name:
        raise SandboxTypeError(f"program reads {p.input_var!r} but the input is bound to {name!r}")
    try:
        result = run_raw(p, arg, limits)
    except RecursionError:
        raise DepthExceeded("host recursion limit reached") from None
    if isinstance(result, (tuple, Grid)):
        machine = Machine(limits)
        machine.check_size(result)
    return _to_value(result)


def language_reference() -> str:
    return resources.files(__package__).joinpath("reference.md").read_text(encoding="utf-8")

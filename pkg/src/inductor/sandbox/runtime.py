"""Evaluator and builtin library for the sandbox language.

Runtime values are ``int``, ``bool``, ``tuple`` (lists, possibly nested),
:class:`Grid` and :class:`Closure`.  Everything is immutable, so builtins
can never mutate the caller's input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

from ..core import RuleApplicationFailure
from . import syntax as S

INT_LIMIT = 10**18


class SandboxError(RuleApplicationFailure):
    pass


class StepLimitExceeded(SandboxError):
    pass


class DepthExceeded(SandboxError):
    pass


class SandboxTypeError(SandboxError):
    pass


class IndexOutOfBounds(SandboxError):
    pass


class OutputSizeExceeded(SandboxError):
    pass


class SandboxRuntimeError(SandboxError):
    pass


@dataclass(frozen=True)
class Limits:
    max_steps: int = 100_000
    max_depth: int = 64
    max_output_cells: int = 4096

    def __post_init__(self):
        if min(self.max_steps, self.max_depth, self.max_output_cells) <= 0:
            raise ValueError("limits must be positive")


@dataclass(frozen=True)
class Grid:
    rows: tuple

    @property
    def height(self) -> int:
        return len(self.rows)

    @property
    def width(self) -> int:
        return len(self.rows[0])


@dataclass(frozen=True)
class Closure:
    param: str
    body: Any
    env: dict

    def __hash__(self):
        return id(self)


@dataclass(frozen=True)
class Builtin:
    name: str
    arity: int
    fn: Callable


BUILTINS: dict = {}


def builtin(name: str, arity: int):
    def deco(fn):
        BUILTINS[name] = Builtin(name, arity, fn)
        return fn

    return deco


def type_name(v: Any) -> str:
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, int):
        return "int"
    if isinstance(v, tuple):
        return "list"
    if isinstance(v, Grid):
        return "grid"
    if isinstance(v, Closure):
        return "function"
    return type(v).__name__


def _int(v, what="argument") -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise SandboxTypeError(f"{what} must be an int, got {type_name(v)}")
    return v


def _bool(v, what="condition") -> bool:
    if not isinstance(v, bool):
        raise SandboxTypeError(f"{what} must be a bool, got {type_name(v)}")
    return v


def _list(v, what="argument") -> tuple:
    if not isinstance(v, tuple):
        raise SandboxTypeError(f"{what} must be a list, got {type_name(v)}")
    return v


def _ints(v, what="argument") -> tuple:
    for x in _list(v, what):
        _int(x, f"element of {what}")
    return v


def _grid(v, what="argument") -> Grid:
    if not isinstance(v, Grid):
        raise SandboxTypeError(f"{what} must be a grid, got {type_name(v)}")
    return v


def _fn(v, what="argument") -> Closure:
    if not isinstance(v, Closure):
        raise SandboxTypeError(f"{what} must be a function, got {type_name(v)}")
    return v


def _color(v) -> int:
    v = _int(v, "grid cell")
    if not 0 <= v <= 9:
        raise SandboxTypeError(f"grid cell {v} outside 0-9")
    return v


def _nonneg(v, what) -> int:
    v = _int(v, what)
    if v < 0:
        raise IndexOutOfBounds(f"negative {what} {v}")
    return v


def make_grid(rows) -> Grid:
    rows = tuple(tuple(_color(c) for c in _list(r, "grid row")) for r in rows)
    if not rows or not rows[0]:
        raise SandboxTypeError("grid must have at least one row and one column")
    if any(len(r) != len(rows[0]) for r in rows):
        raise SandboxTypeError("grid rows must have equal length")
    return Grid(rows)


def size_of(v: Any) -> int:
    if isinstance(v, tuple):
        return sum(size_of(x) if isinstance(x, (tuple, Grid)) else 1 for x in v) if v else 0
    if isinstance(v, Grid):
        return v.height * v.width
    return 1


def equal(a, b) -> bool:
    if type_name(a) != type_name(b):
        return False
    return a == b


class Machine:
    def __init__(self, limits: Limits):
        self.limits = limits
        self.steps = 0
        self.depth = 0

    def charge(self, n: int = 1) -> None:
        self.steps += n
        if self.steps > self.limits.max_steps:
            raise StepLimitExceeded(f"step limit {self.limits.max_steps} exceeded")

    def check_size(self, v):
        if isinstance(v, (tuple, Grid)):
            n = size_of(v)
            self.charge(n // 16)
            if n > self.limits.max_output_cells:
                raise OutputSizeExceeded(f"value with {n} cells exceeds limit {self.limits.max_output_cells}")
        elif isinstance(v, int) and not isinstance(v, bool) and abs(v) > INT_LIMIT:
            raise SandboxRuntimeError("integer overflow")
        return v

    def call(self, f: Closure, arg):
        return self.eval(f.body, {**f.env, f.param: arg})

    def eval(self, node, env: dict):
        self.charge()
        self.depth += 1
        if self.depth > self.limits.max_depth:
            raise DepthExceeded(f"evaluation depth {self.limits.max_depth} exceeded")
        try:
            return self._eval(node, env)
        finally:
            self.depth -= 1

    def _eval(self, node, env):
        if isinstance(node, S.Num):
            return self.check_size(node.value)
        if isinstance(node, S.Bool):
            return node.value
        if isinstance(node, S.Var):
            if node.name not in env:
                raise SandboxTypeError(f"input variable {node.name!r} is not bound for this input")
            return env[node.name]
        if isinstance(node, S.ListLit):
            return self.check_size(tuple(self.eval(x, env) for x in node.items))
        if isinstance(node, S.If):
            if _bool(self.eval(node.cond, env), "if condition"):
                return self.eval(node.then, env)
            return self.eval(node.orelse, env)
        if isinstance(node, S.Lambda):
            return Closure(node.param, node.body, env)
        if isinstance(node, S.Let):
            return self.eval(node.body, {**env, node.name: self.eval(node.value, env)})
        if isinstance(node, S.Unary):
            v = self.eval(node.operand, env)
            if node.op == "not":
                return not _bool(v, "operand of not")
            return self.check_size(-_int(v, "operand of -"))
        if isinstance(node, S.Binary):
            return self._binary(node, env)
        if isinstance(node, S.Call):
            args = [self.eval(a, env) for a in node.args]
            if node.func in env:
                return self.call(_fn(env[node.func], node.func), args[0])
            return self.check_size(BUILTINS[node.func].fn(self, *args))
        raise SandboxRuntimeError(f"unknown node {type(node).__name__}")  # pragma: no cover

    def _binary(self, node, env):
        op = node.op
        if op == "and":
            return _bool(self.eval(node.left, env), "operand of and") and _bool(
                self.eval(node.right, env), "operand of and"
            )
        if op == "or":
            return _bool(self.eval(node.left, env), "operand of or") or _bool(
                self.eval(node.right, env), "operand of or"
            )
        a = self.eval(node.left, env)
        b = self.eval(node.right, env)
        if op == "==":
            return equal(a, b)
        if op == "!=":
            return not equal(a, b)
        a = _int(a, f"left operand of {op}")
        b = _int(b, f"right operand of {op}")
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        if op == ">=":
            return a >= b
        if op == "+":
            return self.check_size(a + b)
        if op == "-":
            return self.check_size(a - b)
        if op == "*":
            return self.check_size(a * b)
        if b == 0:
            raise SandboxRuntimeError("division by zero")
        q = abs(a) // abs(b)
        if (a < 0) != (b < 0):
            q = -q
        return q if op == "/" else a - b * q


# --- list builtins ---------------------------------------------------------


def _nonempty(l, name):
    if not l:
        raise IndexOutOfBounds(f"{name} of empty list")
    return l


@builtin("head", 1)
def _head(m, l):
    return _nonempty(_list(l), "head")[0]


@builtin("last", 1)
def _last(m, l):
    return _nonempty(_list(l), "last")[-1]


@builtin("tail", 1)
def _tail(m, l):
    return _list(l)[1:]


@builtin("init", 1)
def _init(m, l):
    return _list(l)[:-1]


@builtin("len", 1)
def _len(m, l):
    return len(_list(l))


@builtin("reverse", 1)
def _reverse(m, l):
    m.charge(len(_list(l)))
    return l[::-1]


@builtin("sort", 1)
def _sort(m, l):
    m.charge(len(_ints(l)))
    return tuple(sorted(l))


@builtin("unique", 1)
def _unique(m, l):
    out = []
    for x in _list(l):
        m.charge()
        if not any(equal(x, y) for y in out):
            out.append(x)
    return tuple(out)


@builtin("concat", 2)
def _concat(m, a, b):
    return _list(a, "first argument") + _list(b, "second argument")


@builtin("append", 2)
def _append(m, l, v):
    return _list(l) + (v,)


@builtin("slice", 3)
def _slice(m, l, i, j):
    _list(l)
    i = _nonneg(i, "slice start")
    j = _nonneg(j, "slice end")
    n = len(l)
    return l[min(i, n):min(j, n)]


@builtin("index", 2)
def _index(m, l, i):
    _list(l)
    i = _int(i, "index")
    if not 0 <= i < len(l):
        raise IndexOutOfBounds(f"index {i} out of bounds for list of length {len(l)}")
    return l[i]


@builtin("map", 2)
def _map(m, l, f):
    _list(l)
    f = _fn(f)
    return tuple(m.call(f, x) for x in l)


@builtin("filter", 2)
def _filter(m, l, f):
    _list(l)
    f = _fn(f)
    return tuple(x for x in l if _bool(m.call(f, x), "filter predicate result"))


@builtin("fold", 3)
def _fold(m, l, init, f):
    _list(l)
    f = _fn(f)
    acc = init
    for x in l:
        step = _fn(m.call(f, acc), "fold function result")
        acc = m.call(step, x)
    return acc


@builtin("count", 2)
def _count(m, l, v):
    m.charge(len(_list(l)))
    return sum(1 for x in l if equal(x, v))


@builtin("contains", 2)
def _contains(m, l, v):
    m.charge(len(_list(l)))
    return any(equal(x, v) for x in l)


@builtin("remove_all", 2)
def _remove_all(m, l, v):
    m.charge(len(_list(l)))
    return tuple(x for x in l if not equal(x, v))


@builtin("replace", 3)
def _replace(m, l, a, b):
    m.charge(len(_list(l)))
    return tuple(b if equal(x, a) else x for x in l)


@builtin("repeat", 2)
def _repeat(m, v, n):
    n = _nonneg(n, "repeat count")
    if n * max(size_of(v), 1) > m.limits.max_output_cells:
        raise OutputSizeExceeded(f"repeat of {n} exceeds output limit")
    m.charge(n)
    return (v,) * n


@builtin("range", 2)
def _range(m, a, b):
    a, b = _int(a, "range start"), _int(b, "range end")
    if b - a > m.limits.max_output_cells:
        raise OutputSizeExceeded(f"range of {b - a} exceeds output limit")
    m.charge(max(b - a, 0))
    return tuple(range(a, b))


@builtin("sum", 1)
def _sum(m, l):
    m.charge(len(_ints(l)))
    return sum(l)


@builtin("min", 1)
def _min(m, l):
    return min(_nonempty(_ints(l), "min"))


@builtin("max", 1)
def _max(m, l):
    return max(_nonempty(_ints(l), "max"))


@builtin("abs", 1)
def _abs(m, x):
    return abs(_int(x))


@builtin("flatten", 1)
def _flatten(m, l):
    out = []
    for x in _list(l):
        if isinstance(x, tuple):
            out.extend(x)
        else:
            out.append(x)
    m.charge(len(out))
    return tuple(out)


# --- grid builtins ---------------------------------------------------------


@builtin("dims", 1)
def _dims(m, g):
    g = _grid(g)
    return (g.height, g.width)


@builtin("row", 2)
def _row(m, g, r):
    g = _grid(g)
    r = _int(r, "row index")
    if not 0 <= r < g.height:
        raise IndexOutOfBounds(f"row {r} out of bounds for height {g.height}")
    return g.rows[r]


@builtin("col", 2)
def _col(m, g, c):
    g = _grid(g)
    c = _int(c, "column index")
    if not 0 <= c < g.width:
        raise IndexOutOfBounds(f"column {c} out of bounds for width {g.width}")
    return tuple(r[c] for r in g.rows)


def _check_cell(g: Grid, r, c):
    r, c = _int(r, "row index"), _int(c, "column index")
    if not (0 <= r < g.height and 0 <= c < g.width):
        raise IndexOutOfBounds(f"cell ({r}, {c}) out of bounds for {g.height}x{g.width} grid")
    return r, c


@builtin("cell", 3)
def _cell(m, g, r, c):
    g = _grid(g)
    r, c = _check_cell(g, r, c)
    return g.rows[r][c]


@builtin("set_cell", 4)
def _set_cell(m, g, r, c, v):
    g = _grid(g)
    r, c = _check_cell(g, r, c)
    v = _color(v)
    rows = list(g.rows)
    rows[r] = rows[r][:c] + (v,) + rows[r][c + 1:]
    return Grid(tuple(rows))


@builtin("transpose", 1)
def _transpose(m, g):
    g = _grid(g)
    m.charge(g.height * g.width)
    return Grid(tuple(zip(*g.rows)))


@builtin("rotate90", 1)
def _rotate90(m, g):
    # clockwise
    g = _grid(g)
    m.charge(g.height * g.width)
    return Grid(tuple(zip(*g.rows[::-1])))


@builtin("flip_h", 1)
def _flip_h(m, g):
    g = _grid(g)
    return Grid(tuple(r[::-1] for r in g.rows))


@builtin("flip_v", 1)
def _flip_v(m, g):
    g = _grid(g)
    return Grid(g.rows[::-1])


@builtin("crop", 5)
def _crop(m, g, r0, c0, h, w):
    g = _grid(g)
    r0, c0 = _nonneg(r0, "crop row"), _nonneg(c0, "crop column")
    h, w = _int(h, "crop height"), _int(w, "crop width")
    if h < 1 or w < 1 or r0 + h > g.height or c0 + w > g.width:
        raise IndexOutOfBounds(f"crop ({r0}, {c0}, {h}, {w}) outside {g.height}x{g.width} grid")
    return Grid(tuple(r[c0:c0 + w] for r in g.rows[r0:r0 + h]))


@builtin("pad", 4)
def _pad(m, g, h, w, v):
    g = _grid(g)
    h, w, v = _int(h, "pad height"), _int(w, "pad width"), _color(v)
    if h < g.height or w < g.width:
        raise IndexOutOfBounds(f"cannot pad {g.height}x{g.width} grid to {h}x{w}")
    if h * w > m.limits.max_output_cells:
        raise OutputSizeExceeded(f"padded grid {h}x{w} exceeds output limit")
    rows = [r + (v,) * (w - g.width) for r in g.rows]
    rows += [(v,) * w] * (h - g.height)
    return Grid(tuple(rows))


@builtin("map_cells", 2)
def _map_cells(m, g, f):
    g = _grid(g)
    f = _fn(f)
    return Grid(tuple(tuple(_color(m.call(f, c)) for c in r) for r in g.rows))


@builtin("build_grid", 3)
def _build_grid(m, h, w, f):
    h, w = _int(h, "grid height"), _int(w, "grid width")
    f = _fn(f)
    if h < 1 or w < 1:
        raise SandboxTypeError("grid must have at least one row and one column")
    if h * w > m.limits.max_output_cells:
        raise OutputSizeExceeded(f"grid {h}x{w} exceeds output limit")
    rows = []
    for r in range(h):
        at_row = _fn(m.call(f, r), "build_grid function result")
        rows.append(tuple(_color(m.call(at_row, c)) for c in range(w)))
    return Grid(tuple(rows))


@builtin("count_color", 2)
def _count_color(m, g, v):
    g = _grid(g)
    v = _int(v, "color")
    return sum(r.count(v) for r in g.rows)


@builtin("recolor", 3)
def _recolor(m, g, a, b):
    g = _grid(g)
    a, b = _int(a, "color"), _color(b)
    return Grid(tuple(tuple(b if c == a else c for c in r) for r in g.rows))


@builtin("translate", 4)
def _translate(m, g, dr, dc, fill):
    g = _grid(g)
    dr, dc, fill = _int(dr, "row shift"), _int(dc, "column shift"), _color(fill)
    rows = []
    for r in range(g.height):
        sr = r - dr
        row = []
        for c in range(g.width):
            sc = c - dc
            row.append(g.rows[sr][sc] if 0 <= sr < g.height and 0 <= sc < g.width else fill)
        rows.append(tuple(row))
    m.charge(g.height * g.width)
    return Grid(tuple(rows))


@builtin("overlay", 3)
def _overlay(m, a, b, transparent):
    a, b = _grid(a, "base grid"), _grid(b, "top grid")
    t = _int(transparent, "transparent color")
    if (a.height, a.width) != (b.height, b.width):
        raise SandboxTypeError(f"overlay of {a.height}x{a.width} and {b.height}x{b.width} grids")
    return Grid(tuple(tuple(y if y != t else x for x, y in zip(ra, rb)) for ra, rb in zip(a.rows, b.rows)))


@builtin("rows_as_lists", 1)
def _rows_as_lists(m, g):
    return _grid(g).rows


@builtin("grid_from_rows", 1)
def _grid_from_rows(m, rows):
    return make_grid(_list(rows))

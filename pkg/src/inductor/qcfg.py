"""MiniSCAN interpreter: priority-annotated quasi-synchronous grammar rules.

A rule pairs an input-side pattern with an output-side template, sharing
nonterminals written ``##A``.  Translation searches rules in ascending
priority (the lowest-priority rule binds outermost), ties broken by source
order, and assigns nonterminal spans left to right, shortest first.  The
first complete derivation in that order is the translation.

Every rule must anchor on at least one input terminal, so each recursive
step covers a strictly shorter span and the search always terminates.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Optional

from .core import CompileFailure, CompiledRule, Hypothesis, RuleApplicationFailure, Value

DEFAULT_MAX_DEPTH = 30

_NT = re.compile(r"^#{1,2}([A-Za-z_][A-Za-z0-9_]*)$")
_RULE_LINE = re.compile(r"^\s*Rule\s*(\d+)\s*:\s*(.*?)\s*$", re.IGNORECASE)
_PRIORITY_LINE = re.compile(r"^\s*Priority\s*(\d+)\s*:\s*(.*?)\s*$", re.IGNORECASE)
_ARROW = re.compile(r"\s*(?:->|→)\s*")


class GrammarError(CompileFailure):
    def __init__(self, message: str, rule_index: Optional[int] = None):
        super().__init__(message if rule_index is None else f"rule {rule_index + 1}: {message}")
        self.rule_index = rule_index


class NoParseError(RuleApplicationFailure):
    pass


def is_nonterminal(sym: str) -> bool:
    return sym.startswith("##")


def canonical_symbol(tok: str) -> str:
    m = _NT.match(tok)
    return "##" + m.group(1) if m else tok


@dataclass(frozen=True)
class GrammarRule:
    lhs: tuple
    rhs: tuple
    priority: int
    index: int

    def validate(self) -> None:
        lhs_nts = [s for s in self.lhs if is_nonterminal(s)]
        if len(lhs_nts) != len(set(lhs_nts)):
            raise GrammarError("repeated nonterminal on the left-hand side", self.index)
        rhs_nts = {s for s in self.rhs if is_nonterminal(s)}
        if set(lhs_nts) != rhs_nts:
            raise GrammarError("left- and right-hand sides use different nonterminals", self.index)
        if len(lhs_nts) == len(self.lhs):
            raise GrammarError("left-hand side has no terminal token", self.index)
        if not self.rhs:
            raise GrammarError("empty right-hand side", self.index)

    @property
    def is_primitive(self) -> bool:
        return not any(is_nonterminal(s) for s in self.lhs)

    def render(self) -> str:
        return f"{' '.join(self.lhs)} -> {' '.join(self.rhs)}"


@dataclass(frozen=True)
class Grammar:
    rules: tuple
    max_depth: int = DEFAULT_MAX_DEPTH

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        if not self.rules:
            raise GrammarError("grammar has no rules")
        for r in self.rules:
            r.validate()
        if not any(r.is_primitive for r in self.rules):
            raise GrammarError("grammar has no all-terminal (primitive) rule")

    @property
    def search_order(self) -> tuple:
        return tuple(sorted(self.rules, key=lambda r: (r.priority, r.index)))

    def render(self) -> str:
        lines = []
        for k, r in enumerate(self.rules, 1):
            lines.append(f"Rule {k}: {r.render()}")
            lines.append(f"Priority {k}: {r.priority}")
        return "\n".join(lines)


def _split_side(text: str) -> tuple:
    return tuple(canonical_symbol(t) for t in text.strip().strip("\"'`").split())


def parse_grammar(payload: str, max_depth: int = DEFAULT_MAX_DEPTH) -> Grammar:
    bodies: dict = {}
    priorities: dict = {}
    order = []
    for line in payload.splitlines():
        m = _RULE_LINE.match(line)
        if m:
            k = int(m.group(1))
            if k in bodies:
                raise GrammarError(f"duplicate rule number {k}")
            bodies[k] = m.group(2)
            order.append(k)
            continue
        m = _PRIORITY_LINE.match(line)
        if m:
            try:
                priorities[int(m.group(1))] = int(m.group(2).strip("\"'`."))
            except ValueError:
                raise GrammarError(f"priority {m.group(1)} is not an integer: {m.group(2)!r}") from None
    if not order:
        raise GrammarError("no 'Rule <k>:' lines found")
    rules = []
    for idx, k in enumerate(order):
        if k not in priorities:
            raise GrammarError("missing priority", idx)
        sides = _ARROW.split(bodies[k].strip().strip("\"'`"))
        if len(sides) != 2:
            raise GrammarError("expected exactly one '->' in rule", idx)
        lhs, rhs = _split_side(sides[0]), _split_side(sides[1])
        if not lhs:
            raise GrammarError("empty left-hand side", idx)
        rules.append(GrammarRule(lhs, rhs, priorities[k], idx))
    return Grammar(tuple(rules), max_depth)


class _Search:
    """Derivation search over one input. ``memo`` caches first derivations per
    (start, end, depth); enumeration is always unmemoized and lazy."""

    def __init__(self, grammar: Grammar, tokens: tuple, memo: bool = True):
        self.rules = grammar.search_order
        self.max_depth = grammar.max_depth
        self.tokens = tokens
        self.memo: Optional[dict] = {} if memo else None

    def _assignments(self, lhs: tuple, pos: int, end: int, k: int = 0) -> Iterator[tuple]:
        """Yield nonterminal span assignments ((nt, start, stop), ...) matching
        lhs[k:] against tokens[pos:end], shortest spans first, left to right."""
        if k == len(lhs):
            if pos == end:
                yield ()
            return
        remaining = len(lhs) - k - 1
        sym = lhs[k]
        if not is_nonterminal(sym):
            if pos < end and self.tokens[pos] == sym:
                yield from self._assignments(lhs, pos + 1, end, k + 1)
            return
        for stop in range(pos + 1, end - remaining + 1):
            for rest in self._assignments(lhs, stop, end, k + 1):
                yield ((sym, pos, stop),) + rest

    @staticmethod
    def _emit(rhs: tuple, bound: dict) -> tuple:
        out = []
        for s in rhs:
            if is_nonterminal(s):
                out.extend(bound[s])
            else:
                out.append(s)
        return tuple(out)

    def first(self, start: int, end: int, depth: int = 0) -> Optional[tuple]:
        if depth >= self.max_depth:
            return None
        key = (start, end, depth)
        if self.memo is not None and key in self.memo:
            return self.memo[key]
        result = None
        for rule in self.rules:
            for assign in self._assignments(rule.lhs, start, end):
                bound = {}
                for nt, a, b in assign:
                    sub = self.first(a, b, depth + 1)
                    if sub is None:
                        break
                    bound[nt] = sub
                else:
                    result = self._emit(rule.rhs, bound)
                    break
            if result is not None:
                break
        if self.memo is not None:
            self.memo[key] = result
        return result

    def all(self, start: int, end: int, depth: int = 0) -> Iterator[tuple]:
        if depth >= self.max_depth:
            return
        for rule in self.rules:
            for assign in self._assignments(rule.lhs, start, end):
                for bound in self._bind(assign, depth + 1):
                    yield self._emit(rule.rhs, bound)

    def _bind(self, assign: tuple, depth: int) -> Iterator[dict]:
        if not assign:
            yield {}
            return
        (nt, a, b), rest = assign[0], assign[1:]
        for sub in self.all(a, b, depth):
            for more in self._bind(rest, depth):
                yield {nt: sub, **more}


def _input_tokens(value) -> tuple:
    toks = tuple(" ".join(value.data).split()) if isinstance(value, Value) else tuple(value)
    if not toks:
        raise NoParseError("empty input")
    return toks


def derive(grammar: Grammar, value, memo: bool = True) -> Value:
    toks = _input_tokens(value)
    out = _Search(grammar, toks, memo).first(0, len(toks))
    if out is None:
        raise NoParseError(f"no derivation for {' '.join(toks)!r}")
    return Value.tokens(out)


def enumerate_derivations(grammar: Grammar, value, limit: int) -> list:
    if limit < 1:
        raise ValueError("limit must be >= 1")
    toks = _input_tokens(value)
    seen = []
    for out in _Search(grammar, toks, memo=False).all(0, len(toks)):
        if out not in seen:
            seen.append(out)
            if len(seen) >= limit:
                break
    return [Value.tokens(o) for o in seen]


class QcfgInterpreter:
    def __init__(self, max_depth: int = DEFAULT_MAX_DEPTH):
        self.max_depth = max_depth

    def compile(self, h: Hypothesis) -> CompiledRule:
        if h.payload is None:
            raise CompileFailure(h.error or "ill-formed hypothesis")
        grammar = parse_grammar(h.payload, self.max_depth)
        return CompiledRule(h, lambda v: derive(grammar, v))

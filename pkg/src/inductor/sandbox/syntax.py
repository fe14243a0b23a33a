"""Tokenizer, AST and recursive-descent parser for the sandbox language."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from ..core import CompileFailure

KEYWORDS = {"if", "then", "else", "fn", "let", "in", "and", "or", "not", "true", "false", "mod"}
INPUT_VARS = ("xs", "g")
MAX_NESTING = 64


class SandboxSyntaxError(CompileFailure):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at position {pos}")
        self.pos = pos


class UnknownIdentifierError(SandboxSyntaxError):
    def __init__(self, name: str, pos: int):
        super().__init__(f"unknown identifier {name!r}", pos)
        self.name = name


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|<=|>=|[-+*/%<>()\[\],=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Tok:
    kind: str  # int | ident | kw | op | eof
    text: str
    pos: int


def tokenize(source: str) -> list:
    toks = []
    pos = 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if not m:
            raise SandboxSyntaxError(f"unexpected character {source[pos]!r}", pos)
        kind = m.lastgroup
        text = m.group(0)
        if kind == "ident" and text in KEYWORDS:
            kind = "kw"
        if kind not in ("ws", "comment"):
            toks.append(Tok(kind, text, pos))
        pos = m.end()
    toks.append(Tok("eof", "", len(source)))
    return toks


# --- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class Node:
    pos: int


@dataclass(frozen=True)
class Num(Node):
    value: int


@dataclass(frozen=True)
class Bool(Node):
    value: bool


@dataclass(frozen=True)
class Var(Node):
    name: str


@dataclass(frozen=True)
class ListLit(Node):
    items: tuple


@dataclass(frozen=True)
class Unary(Node):
    op: str
    operand: Node


@dataclass(frozen=True)
class Binary(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class If(Node):
    cond: Node
    then: Node
    orelse: Node


@dataclass(frozen=True)
class Lambda(Node):
    param: str
    body: Node


@dataclass(frozen=True)
class Let(Node):
    name: str
    value: Node
    body: Node


@dataclass(frozen=True)
class Call(Node):
    func: str  # builtin name or a bound variable holding a function
    args: tuple


# --- parser ----------------------------------------------------------------

_CMP = ("==", "!=", "<", "<=", ">", ">=")


class _Parser:
    def __init__(self, source: str, builtins: dict):
        self.toks = tokenize(source)
        self.i = 0
        self.builtins = builtins
        self.nesting = 0
        self.free: set = set()

    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def advance(self) -> Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at(self, *texts: str) -> bool:
        return self.tok.kind in ("op", "kw") and self.tok.text in texts

    def expect(self, text: str) -> Tok:
        if not self.at(text):
            got = self.tok.text or "end of input"
            raise SandboxSyntaxError(f"expected {text!r}, got {got!r}", self.tok.pos)
        return self.advance()

    def expect_ident(self) -> Tok:
        if self.tok.kind != "ident":
            raise SandboxSyntaxError(f"expected identifier, got {self.tok.text or 'end of input'!r}", self.tok.pos)
        return self.advance()

    def parse(self) -> Node:
        node = self.expr(frozenset())
        if self.tok.kind != "eof":
            raise SandboxSyntaxError(f"unexpected {self.tok.text!r}", self.tok.pos)
        return node

    def expr(self, scope: frozenset) -> Node:
        self.nesting += 1
        if self.nesting > MAX_NESTING:
            raise SandboxSyntaxError("expression nested too deeply", self.tok.pos)
        try:
            t = self.tok
            if self.at("if"):
                self.advance()
                cond = self.expr(scope)
                self.expect("then")
                a = self.expr(scope)
                self.expect("else")
                return If(t.pos, cond, a, self.expr(scope))
            if self.at("fn"):
                self.advance()
                self.expect("(")
                param = self.expect_ident().text
                self.expect(")")
                return Lambda(t.pos, param, self.expr(scope | {param}))
            if self.at("let"):
                self.advance()
                name = self.expect_ident().text
                self.expect("=")
                value = self.expr(scope)
                self.expect("in")
                return Let(t.pos, name, value, self.expr(scope | {name}))
            return self.disjunction(scope)
        finally:
            self.nesting -= 1

    def disjunction(self, scope):
        left = self.conjunction(scope)
        while self.at("or"):
            t = self.advance()
            left = Binary(t.pos, "or", left, self.conjunction(scope))
        return left

    def conjunction(self, scope):
        left = self.negation(scope)
        while self.at("and"):
            t = self.advance()
            left = Binary(t.pos, "and", left, self.negation(scope))
        return left

    def negation(self, scope):
        if self.at("not"):
            t = self.advance()
            return Unary(t.pos, "not", self.negation(scope))
        return self.comparison(scope)

    def comparison(self, scope):
        left = self.additive(scope)
        if self.at(*_CMP):
            t = self.advance()
            left = Binary(t.pos, t.text, left, self.additive(scope))
            if self.at(*_CMP):
                raise SandboxSyntaxError("chained comparisons are not allowed", self.tok.pos)
        return left

    def additive(self, scope):
        left = self.multiplicative(scope)
        while self.at("+", "-"):
            t = self.advance()
            left = Binary(t.pos, t.text, left, self.multiplicative(scope))
        return left

    def multiplicative(self, scope):
        left = self.unary(scope)
        while self.at("*", "/", "%", "mod"):
            t = self.advance()
            op = "mod" if t.text in ("%", "mod") else t.text
            left = Binary(t.pos, op, left, self.unary(scope))
        return left

    def unary(self, scope):
        if self.at("-"):
            t = self.advance()
            return Unary(t.pos, "-", self.unary(scope))
        return self.primary(scope)

    def primary(self, scope):
        t = self.tok
        if t.kind == "int":
            self.advance()
            return Num(t.pos, int(t.text))
        if self.at("true", "false"):
            self.advance()
            return Bool(t.pos, t.text == "true")
        if self.at("("):
            self.advance()
            node = self.expr(scope)
            self.expect(")")
            return node
        if self.at("["):
            self.advance()
            items = []
            if not self.at("]"):
                items.append(self.expr(scope))
                while self.at(","):
                    self.advance()
                    items.append(self.expr(scope))
            self.expect("]")
            return ListLit(t.pos, tuple(items))
        if self.at("fn", "if", "let"):
            return self.expr(scope)
        if t.kind == "ident":
            self.advance()
            name = t.text
            if self.at("("):
                self.advance()
                args = []
                if not self.at(")"):
                    args.append(self.expr(scope))
                    while self.at(","):
                        self.advance()
                        args.append(self.expr(scope))
                self.expect(")")
                if name in scope or name in INPUT_VARS:
                    if name in INPUT_VARS and name not in scope:
                        self.free.add(name)
                    if len(args) != 1:
                        raise SandboxSyntaxError(f"function value {name!r} takes exactly one argument", t.pos)
                elif name in self.builtins:
                    arity = self.builtins[name].arity
                    if len(args) != arity:
                        raise SandboxSyntaxError(
                            f"{name} expects {arity} argument{'s' if arity != 1 else ''}, got {len(args)}", t.pos
                        )
                else:
                    raise UnknownIdentifierError(name, t.pos)
                return Call(t.pos, name, tuple(args))
            if name in scope:
                return Var(t.pos, name)
            if name in INPUT_VARS:
                self.free.add(name)
                return Var(t.pos, name)
            if name in self.builtins:
                raise SandboxSyntaxError(f"builtin {name!r} must be called", t.pos)
            raise UnknownIdentifierError(name, t.pos)
        raise SandboxSyntaxError(f"unexpected {t.text or 'end of input'!r}", t.pos)


def parse(source: str, builtins: dict) -> tuple:
    """Return (ast, input variable or None)."""
    if not source.strip():
        raise SandboxSyntaxError("empty program", 0)
    p = _Parser(source, builtins)
    try:
        ast = p.parse()
    except RecursionError:
        raise SandboxSyntaxError("expression nested too deeply", 0) from None
    if len(p.free) > 1:
        raise SandboxSyntaxError("program may use either 'xs' or 'g', not both", 0)
    input_var: Optional[str] = next(iter(p.free), None)
    return ast, input_var

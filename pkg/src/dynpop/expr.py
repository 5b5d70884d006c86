"""Arithmetic expression language for declarative game files.

Grammar (LL(1), recursive descent):

    expr   := term   (("+"|"-") term)*
    term   := factor (("*"|"/") factor)*
    factor := NUMBER | ref | func "(" expr ("," expr)* ")" | "(" expr ")" | "-" factor
    ref    := ("d"|"pi"|"g") "(" INT ("," INT)* ")"

Reference arities are fixed: d(tau,x), pi(tau,a,x), g(tau). Functions are
exp/1, log/1, min/2, max/2. There is no bound-variable summation; aggregate
quantities are written as explicit sums of reference terms.

Evaluation is pure and total except for division by zero and log of a
non-positive value, which raise EvalError. exp overflow saturates to +inf.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .errors import (
    ArityError,
    EvalError,
    ExprIndexError,
    ExprSyntaxError,
    UnknownIdentifierError,
)

REF_ARITY = {"d": 2, "pi": 3, "g": 1}
FUNC_ARITY = {"exp": 1, "log": 1, "min": 2, "max": 2}


# ---------------------------------------------------------------------------
# Abstract syntax tree


@dataclass(frozen=True, slots=True)
class Num:
    value: float


@dataclass(frozen=True, slots=True)
class Ref:
    kind: str               # "d" | "pi" | "g"
    args: tuple[int, ...]


@dataclass(frozen=True, slots=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True, slots=True)
class Bin:
    op: str                 # "+" | "-" | "*" | "/"
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True, slots=True)
class Call:
    name: str
    args: tuple["Expr", ...]


Expr = Num | Ref | Neg | Bin | Call


# ---------------------------------------------------------------------------
# Tokenizer

_NUMBER_RE = re.compile(r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


@dataclass(frozen=True, slots=True)
class _Token:
    kind: str               # "number" | "ident" | one of "()+-*/," | "eof"
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        m = _NUMBER_RE.match(text, i)
        if m:
            tokens.append(_Token("number", m.group(), line, col))
            col += m.end() - i
            i = m.end()
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            tokens.append(_Token("ident", m.group(), line, col))
            col += m.end() - i
            i = m.end()
            continue
        if ch in "()+-*/,":
            tokens.append(_Token(ch, ch, line, col))
            i += 1
            col += 1
            continue
        raise ExprSyntaxError(f"unexpected character {ch!r}", line, col)
    tokens.append(_Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def cur(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.cur
        self.pos += 1
        return tok

    def expect(self, kind: str) -> _Token:
        if self.cur.kind != kind:
            got = self.cur.text if self.cur.kind != "eof" else "end of input"
            raise ExprSyntaxError(
                f"expected {kind!r}, got {got!r}", self.cur.line, self.cur.col
            )
        return self.advance()

    def parse(self) -> Expr:
        node = self.expr()
        if self.cur.kind != "eof":
            raise ExprSyntaxError(
                f"unexpected trailing input {self.cur.text!r}",
                self.cur.line,
                self.cur.col,
            )
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.cur.kind in ("+", "-"):
            op = self.advance().kind
            node = Bin(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.cur.kind in ("*", "/"):
            op = self.advance().kind
            node = Bin(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        tok = self.cur
        if tok.kind == "number":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "-":
            self.advance()
            return Neg(self.factor())
        if tok.kind == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "ident":
            self.advance()
            name = tok.text
            if name in REF_ARITY:
                return self.ref(name, tok)
            if name in FUNC_ARITY:
                return self.call(name, tok)
            raise UnknownIdentifierError(
                f"unknown identifier {name!r} at {tok.line}:{tok.col}"
            )
        got = tok.text if tok.kind != "eof" else "end of input"
        raise ExprSyntaxError(f"expected a value, got {got!r}", tok.line, tok.col)

    def ref(self, kind: str, tok: _Token) -> Ref:
        self.expect("(")
        args = [self.ref_index()]
        while self.cur.kind == ",":
            self.advance()
            args.append(self.ref_index())
        self.expect(")")
        if len(args) != REF_ARITY[kind]:
            raise ArityError(
                f"{kind} takes {REF_ARITY[kind]} indices, got {len(args)}"
                f" at {tok.line}:{tok.col}"
            )
        return Ref(kind, tuple(args))

    def ref_index(self) -> int:
        tok = self.cur
        if tok.kind != "number" or not tok.text.isdigit():
            got = tok.text if tok.kind != "eof" else "end of input"
            raise ExprSyntaxError(f"expected an integer index, got {got!r}",
                                  tok.line, tok.col)
        self.advance()
        return int(tok.text)

    def call(self, name: str, tok: _Token) -> Call:
        self.expect("(")
        args = [self.expr()]
        while self.cur.kind == ",":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        if len(args) != FUNC_ARITY[name]:
            raise ArityError(
                f"{name} takes {FUNC_ARITY[name]} argument(s), got {len(args)}"
                f" at {tok.line}:{tok.col}"
            )
        return Call(name, tuple(args))


def parse_expr(text: str) -> Expr:
    """Parse an expression string into its syntax tree."""
    return _Parser(_tokenize(text)).parse()


# ---------------------------------------------------------------------------
# Canonical printing (parse(unparse(e)) reproduces e exactly)

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def unparse(e: Expr) -> str:
    return _unparse(e, 0, False)


def _unparse(e: Expr, parent_prec: int, is_right: bool) -> str:
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Ref):
        return f"{e.kind}({','.join(str(a) for a in e.args)})"
    if isinstance(e, Call):
        return f"{e.name}({','.join(_unparse(a, 0, False) for a in e.args)})"
    if isinstance(e, Neg):
        return "-" + _unparse(e.operand, 3, False)
    prec = _PREC[e.op]
    text = (
        _unparse(e.left, prec, False)
        + f" {e.op} "
        + _unparse(e.right, prec, True)
    )
    if prec < parent_prec or (prec == parent_prec and is_right):
        return f"({text})"
    return text


# ---------------------------------------------------------------------------
# Index checking and evaluation


def check_refs(e: Expr, n_tau: int, n_x: int, n_a: int, mask=None) -> None:
    """Verify every reference indexes inside the game dimensions (and the
    action mask when given); raises ExprIndexError naming the reference."""
    if isinstance(e, Ref):
        name = unparse(e)
        if e.kind == "d":
            tau, x = e.args
            ok = tau < n_tau and x < n_x
        elif e.kind == "g":
            (tau,) = e.args
            ok = tau < n_tau
        else:
            tau, a, x = e.args
            ok = tau < n_tau and a < n_a and x < n_x
            if ok and mask is not None and not mask[tau, x, a]:
                raise ExprIndexError(f"reference {name} names a masked action")
        if not ok:
            raise ExprIndexError(f"reference {name} is out of range for "
                                 f"{n_tau} type(s), {n_x} state(s), {n_a} action(s)")
    elif isinstance(e, Neg):
        check_refs(e.operand, n_tau, n_x, n_a, mask)
    elif isinstance(e, Bin):
        check_refs(e.left, n_tau, n_x, n_a, mask)
        check_refs(e.right, n_tau, n_x, n_a, mask)
    elif isinstance(e, Call):
        for a in e.args:
            check_refs(a, n_tau, n_x, n_a, mask)


def evaluate(e: Expr, pi, d, g) -> float:
    """Evaluate against policy table pi[tau, x, a], distribution d[tau, x]
    and type masses g[tau]."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Ref):
        if e.kind == "d":
            return float(d[e.args[0], e.args[1]])
        if e.kind == "g":
            return float(g[e.args[0]])
        tau, a, x = e.args
        return float(pi[tau, x, a])
    if isinstance(e, Neg):
        return -evaluate(e.operand, pi, d, g)
    if isinstance(e, Bin):
        lhs = evaluate(e.left, pi, d, g)
        rhs = evaluate(e.right, pi, d, g)
        if e.op == "+":
            return lhs + rhs
        if e.op == "-":
            return lhs - rhs
        if e.op == "*":
            return lhs * rhs
        if rhs == 0.0:
            raise EvalError(f"division by zero in {unparse(e)}")
        return lhs / rhs
    args = [evaluate(a, pi, d, g) for a in e.args]
    return _apply(e.name, args, e)


def _apply(name: str, args: list[float], node: Call) -> float:
    if name == "exp":
        try:
            return math.exp(args[0])
        except OverflowError:
            return math.inf
    if name == "log":
        if args[0] <= 0.0:
            raise EvalError(f"log of non-positive value in {unparse(node)}")
        return math.log(args[0])
    if name == "min":
        return min(args)
    return max(args)


def compile_expr(e: Expr, n_tau: int, n_x: int, n_a: int, mask=None):
    """Compile to a closure f(pi, d, g) -> float. Index errors surface here,
    at compile time, rather than on first evaluation."""
    check_refs(e, n_tau, n_x, n_a, mask)
    return _compile(e)


def _compile(e: Expr):
    if isinstance(e, Num):
        v = e.value
        return lambda pi, d, g: v
    if isinstance(e, Ref):
        if e.kind == "d":
            t, x = e.args
            return lambda pi, d, g: d[t, x]
        if e.kind == "g":
            (t,) = e.args
            return lambda pi, d, g: g[t]
        t, a, x = e.args
        return lambda pi, d, g: pi[t, x, a]
    if isinstance(e, Neg):
        f = _compile(e.operand)
        return lambda pi, d, g: -f(pi, d, g)
    if isinstance(e, Bin):
        lf, rf = _compile(e.left), _compile(e.right)
        if e.op == "+":
            return lambda pi, d, g: lf(pi, d, g) + rf(pi, d, g)
        if e.op == "-":
            return lambda pi, d, g: lf(pi, d, g) - rf(pi, d, g)
        if e.op == "*":
            return lambda pi, d, g: lf(pi, d, g) * rf(pi, d, g)
        label = unparse(e)

        def div(pi, d, g):
            denom = rf(pi, d, g)
            if denom == 0.0:
                raise EvalError(f"division by zero in {label}")
            return lf(pi, d, g) / denom

        return div
    fns = [_compile(a) for a in e.args]
    if e.name == "exp":
        f0 = fns[0]

        def fexp(pi, d, g):
            try:
                return math.exp(f0(pi, d, g))
            except OverflowError:
                return math.inf

        return fexp
    if e.name == "log":
        f0 = fns[0]
        label = unparse(e)

        def flog(pi, d, g):
            v = f0(pi, d, g)
            if v <= 0.0:
                raise EvalError(f"log of non-positive value in {label}")
            return math.log(v)

        return flog
    if e.name == "min":
        f0, f1 = fns
        return lambda pi, d, g: min(f0(pi, d, g), f1(pi, d, g))
    f0, f1 = fns
    return lambda pi, d, g: max(f0(pi, d, g), f1(pi, d, g))

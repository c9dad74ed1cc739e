"""Decline-rule expressions: parsing, printing and evaluation.

Grammar::

    expr    := and_expr (("or" | "lub") and_expr)*
    and_expr:= cmp ("and" cmp)*
    cmp     := "(" expr ")" | operand (op operand)+
    operand := identifier | number ["%"]
    op      := "<" | "<=" | ">" | ">=" | "=" | "!="

Numbers accept "." or "," as the decimal separator; a trailing "%" divides
by 100.  Chained comparisons such as ``8,19%>=PD_Ins>2,18%`` hold when every
adjacent pair holds.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from decimal import Decimal


class RuleSyntaxError(ValueError):
    def __init__(self, message: str, text: str, pos: int):
        super().__init__(f"{message} at position {pos}: {text!r}")
        self.pos = pos


class UnboundIdentifier(KeyError):
    pass


@dataclass(frozen=True)
class Number:
    value: float
    text: str  # normalised source form, used by the printer


@dataclass(frozen=True)
class Name:
    name: str


@dataclass(frozen=True)
class Compare:
    operands: tuple  # Number | Name, length n + 1
    ops: tuple  # n operator strings


@dataclass(frozen=True)
class BoolOp:
    op: str  # "and" | "or"
    args: tuple


@dataclass(frozen=True)
class Evaluation:
    fired: bool
    missing_operand: bool


_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>\d+(?:[.,]\d+)?%?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|!=|<|>|=)
  | (?P<lp>\()
  | (?P<rp>\))
""", re.VERBOSE)

_KEYWORDS = {"and": "and", "or": "or", "lub": "or"}
_OPS = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
}


def _tokenize(text: str):
    pos, out = 0, []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise RuleSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        if kind != "ws":
            val = m.group()
            if kind == "name" and val.lower() in _KEYWORDS:
                kind, val = "kw", _KEYWORDS[val.lower()]
            out.append((kind, val, pos))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


def _number(tok: str) -> Number:
    pct = tok.endswith("%")
    body = tok.rstrip("%").replace(",", ".")
    value = float(Decimal(body) / 100) if pct else float(body)
    return Number(value, body + ("%" if pct else ""))


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None, value=None):
        tok = self.toks[self.i]
        if (kind and tok[0] != kind) or (value and tok[1] != value):
            want = value or kind
            got = tok[1] or "end of input"
            raise RuleSyntaxError(f"expected {want}, got {got!r}", self.text, tok[2])
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            tok = self.peek()
            if tok[0] == "rp":
                raise RuleSyntaxError("unbalanced ')'", self.text, tok[2])
            raise RuleSyntaxError(f"unexpected {tok[1]!r}", self.text, tok[2])
        return node

    def expr(self):
        args = [self.and_expr()]
        while self.peek()[:2] == ("kw", "or"):
            self.take()
            args.append(self.and_expr())
        return args[0] if len(args) == 1 else BoolOp("or", tuple(args))

    def and_expr(self):
        args = [self.cmp()]
        while self.peek()[:2] == ("kw", "and"):
            self.take()
            args.append(self.cmp())
        return args[0] if len(args) == 1 else BoolOp("and", tuple(args))

    def cmp(self):
        tok = self.peek()
        if tok[0] == "lp":
            self.take()
            node = self.expr()
            if self.peek()[0] != "rp":
                raise RuleSyntaxError("unbalanced '('", self.text, tok[2])
            self.take()
            return node
        operands = [self.operand()]
        ops = []
        while self.peek()[0] == "op":
            ops.append(self.take()[1])
            operands.append(self.operand())
        if not ops:
            raise RuleSyntaxError("expected a comparison", self.text, self.peek()[2])
        return Compare(tuple(operands), tuple(ops))

    def operand(self):
        kind, val, pos = self.peek()
        if kind == "num":
            self.take()
            return _number(val)
        if kind == "name":
            self.take()
            return Name(val)
        raise RuleSyntaxError(f"expected an identifier or number, got {val or 'end of input'!r}",
                              self.text, pos)


def parse_rule(text: str, known=None):
    """Parse rule text into an AST.

    Args:
        text: rule source.
        known: optional collection of valid identifiers (case-insensitive);
            unknown names raise :class:`RuleSyntaxError`.
    """
    node = _Parser(text).parse()
    if known is not None:
        lower = {k.lower() for k in known}
        for name in identifiers(node):
            if name.lower() not in lower:
                pos = text.find(name)
                raise RuleSyntaxError(f"unknown identifier {name!r}", text, max(pos, 0))
    return node


def identifiers(node) -> list[str]:
    if isinstance(node, Name):
        return [node.name]
    if isinstance(node, Number):
        return []
    if isinstance(node, Compare):
        return [n for o in node.operands for n in identifiers(o)]
    return [n for a in node.args for n in identifiers(a)]


def to_text(node, _parent: str | None = None) -> str:
    """Canonical printer; ``parse_rule(to_text(ast)) == ast``."""
    if isinstance(node, Number):
        return node.text
    if isinstance(node, Name):
        return node.name
    if isinstance(node, Compare):
        parts = [to_text(node.operands[0])]
        for op, o in zip(node.ops, node.operands[1:]):
            parts += [op, to_text(o)]
        return " ".join(parts)
    inner = f" {node.op} ".join(to_text(a, node.op) for a in node.args)
    if _parent is not None:
        return f"({inner})"
    return inner


def _lookup(bindings, name: str):
    if name in bindings:
        return bindings[name]
    lower = name.lower()
    for k in bindings.keys():
        if k.lower() == lower:
            return bindings[k]
    raise UnboundIdentifier(name)


def _is_missing(v) -> bool:
    return v is None or (isinstance(v, float) and math.isnan(v))


def evaluate_rule(node, bindings) -> Evaluation:
    """Evaluate against a mapping of names to values.

    A comparison touching a missing value is false and flags
    ``missing_operand``.
    """
    if isinstance(node, Compare):
        vals = []
        for o in node.operands:
            v = o.value if isinstance(o, Number) else _lookup(bindings, o.name)
            vals.append(v)
        if any(_is_missing(v) for v in vals):
            return Evaluation(False, True)
        ok = all(_OPS[op](float(a), float(b)) for op, a, b in zip(node.ops, vals, vals[1:]))
        return Evaluation(bool(ok), False)
    if isinstance(node, BoolOp):
        results = [evaluate_rule(a, bindings) for a in node.args]
        fired = (all if node.op == "and" else any)(r.fired for r in results)
        return Evaluation(fired, any(r.missing_operand for r in results))
    raise TypeError(f"cannot evaluate {node!r}")


def evaluate_frame(node, frame):
    """Vectorised evaluation over a DataFrame; returns (fired, missing_operand) arrays."""
    import numpy as np

    n = len(frame)
    if isinstance(node, Compare):
        cols = []
        for o in node.operands:
            if isinstance(o, Number):
                cols.append(np.full(n, o.value))
            else:
                cols.append(np.asarray(_lookup(frame, o.name), dtype=float))
        missing = np.zeros(n, dtype=bool)
        for c in cols:
            missing |= np.isnan(c)
        ok = np.ones(n, dtype=bool)
        with np.errstate(invalid="ignore"):
            for op, a, b in zip(node.ops, cols, cols[1:]):
                ok &= _OPS[op](a, b)
        return ok & ~missing, missing
    results = [evaluate_frame(a, frame) for a in node.args]
    fired = results[0][0].copy()
    missing = results[0][1].copy()
    for f, m in results[1:]:
        fired = fired & f if node.op == "and" else fired | f
        missing |= m
    return fired, missing

"""Acceptance strategies: named decline rules per product, loaded from text configs.

Config layout (``configparser`` syntax, ``:`` separates a rule name from
its expression)::

    [strategy]
    id: strategy1
    description: ...

    [Ins]
    PD_Ins Cutoff: PD_Ins>8,19%

    [Css]
    PD_Css Cutoff: PD_Css>27,24%
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd

from creditlab.engine.rules import evaluate_frame, identifiers, parse_rule, to_text

PRODUCTS = ("Ins", "Css")
NOT_KNOWN = "Not known customer"
ACCEPTED = "Accepted"
SHIPPED_STRATEGIES = ("strategy1", "strategy2", "strategy3", "strategy4")


class StrategyConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Rule:
    name: str
    expr: object
    text: str = field(default="", compare=False)

    @classmethod
    def from_text(cls, name: str, text: str) -> "Rule":
        return cls(name, parse_rule(text), text)


@dataclass(frozen=True)
class Strategy:
    """Ordered decline rules per product; the first rule that fires declines."""

    id: str
    rules: dict = field(default_factory=dict)  # product -> tuple of Rule
    description: str = ""

    def __post_init__(self):
        for product, rules in self.rules.items():
            if product not in PRODUCTS:
                raise StrategyConfigError(f"unknown product {product!r}")
            names = [r.name for r in rules]
            if len(set(names)) != len(names):
                raise StrategyConfigError(f"duplicate rule names for {product}")
            if NOT_KNOWN in names or ACCEPTED in names:
                raise StrategyConfigError("rule names clash with report labels")

    def for_product(self, product: str) -> tuple:
        return tuple(self.rules.get(product, ()))

    def identifiers(self) -> set[str]:
        return {n for rules in self.rules.values() for r in rules for n in identifiers(r.expr)}

    def validate(self, known) -> None:
        """Raise when a rule references a name outside ``known`` (case-insensitive)."""
        lower = {k.lower() for k in known}
        missing = sorted(n for n in self.identifiers() if n.lower() not in lower)
        if missing:
            raise StrategyConfigError(f"rules reference unknown variables: {missing}")

    def decide(self, product: str, frame: pd.DataFrame) -> tuple[np.ndarray, np.ndarray]:
        """First-match decision per row: reason label and missing-operand flag."""
        reason = np.full(len(frame), ACCEPTED, dtype=object)
        flagged = np.zeros(len(frame), dtype=bool)
        open_ = np.ones(len(frame), dtype=bool)
        for rule in self.for_product(product):
            fired, missing = evaluate_frame(rule.expr, frame)
            flagged |= missing & open_
            hit = fired & open_
            reason[hit] = rule.name
            open_ &= ~hit
        return reason, flagged

    def to_text(self) -> str:
        lines = ["[strategy]", f"id: {self.id}"]
        if self.description:
            lines.append(f"description: {self.description}")
        for product in PRODUCTS:
            lines += ["", f"[{product}]"]
            lines += [f"{r.name}: {to_text(r.expr)}" for r in self.for_product(product)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Strategy":
        parser = configparser.ConfigParser(delimiters=(":",), comment_prefixes=("#",),
                                           inline_comment_prefixes=None, interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise StrategyConfigError(str(exc)) from exc
        unknown = set(parser.sections()) - {"strategy", *PRODUCTS}
        if unknown:
            raise StrategyConfigError(f"unknown sections: {sorted(unknown)}")
        meta = parser["strategy"] if parser.has_section("strategy") else {}
        rules = {}
        for product in PRODUCTS:
            if parser.has_section(product):
                try:
                    rules[product] = tuple(Rule.from_text(k, v) for k, v in parser[product].items())
                except ValueError as exc:
                    raise StrategyConfigError(f"[{product}] {exc}") from exc
        return cls(meta.get("id", "strategy"), rules, meta.get("description", ""))

    @classmethod
    def load(cls, path) -> "Strategy":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def from_rules(cls, id: str, ins=(), css=(), description: str = "") -> "Strategy":
        """Build from ``(name, text)`` pairs per product."""
        return cls(id, {"Ins": tuple(Rule.from_text(n, t) for n, t in ins),
                        "Css": tuple(Rule.from_text(n, t) for n, t in css)}, description)


def shipped_strategy(name: str) -> Strategy:
    """One of the four shipped strategies (``strategy1`` .. ``strategy4``)."""
    if name not in SHIPPED_STRATEGIES:
        raise KeyError(name)
    text = resources.files("creditlab.engine").joinpath("strategies", f"{name}.txt").read_text(
        encoding="utf-8")
    return Strategy.from_text(text)


ACCEPT_ALL = Strategy("accept_all", {"Ins": (), "Css": ()}, "accept every application")

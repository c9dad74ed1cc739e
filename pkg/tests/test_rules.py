import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from creditlab.engine.rules import (
    BoolOp,
    Compare,
    Name,
    Number,
    RuleSyntaxError,
    UnboundIdentifier,
    evaluate_frame,
    evaluate_rule,
    identifiers,
    parse_rule,
    to_text,
)


def test_percent_threshold_parses_to_fraction():
    node = parse_rule("PD_Ins>8.19%")
    assert isinstance(node, Compare)
    assert node.operands[0] == Name("PD_Ins")
    assert node.ops == (">",)
    assert node.operands[1].value == pytest.approx(0.0819, abs=1e-15)
    assert parse_rule("PD_Ins>8,19%") == node


def test_abt_variable_rule():
    node = parse_rule("agr12_Max_CMaxA_Due>3")
    assert node == Compare((Name("agr12_Max_CMaxA_Due"), Number(3.0, "3")), (">",))


def test_and_binds_tighter_than_or():
    node = parse_rule("(A<1 or B>2) and C<=3")
    assert isinstance(node, BoolOp) and node.op == "and"
    assert isinstance(node.args[0], BoolOp) and node.args[0].op == "or"
    flat = parse_rule("A<1 or B>2 and C<=3")
    assert flat.op == "or" and flat.args[1].op == "and"


def test_chained_comparison_and_keywords():
    node = parse_rule("8,19%>=PD_Ins>2,18% lub X=1")
    assert node.op == "or"
    assert evaluate_rule(node, {"PD_Ins": 0.05, "X": 0}).fired
    assert not evaluate_rule(node, {"PD_Ins": 0.09, "X": 0}).fired
    assert identifiers(node) == ["PD_Ins", "X"]


@pytest.mark.parametrize("text", ["PD_Ins>", "(A<1", "A<1)", "A<1 and", "A<<1", "A>1,2,3", "A>1 B<2", "A ? 1", ""])
def test_syntax_errors_carry_positions(text):
    with pytest.raises(RuleSyntaxError) as err:
        parse_rule(text)
    assert 0 <= err.value.pos <= len(text)


def test_unknown_identifier_rejected_when_names_known():
    with pytest.raises(RuleSyntaxError, match="unknown identifier"):
        parse_rule("pd_ins>1% and Foo<2", known=["PD_Ins"])
    assert parse_rule("pd_ins>1%", known=["PD_Ins"])


def test_evaluation_examples():
    assert evaluate_rule(parse_rule("PD_Ins>8.19%"), {"PD_Ins": 0.09}).fired
    res = evaluate_rule(parse_rule("agr12_Max_CMaxA_Due>3"), {"agr12_Max_CMaxA_Due": float("nan")})
    assert not res.fired and res.missing_operand
    res = evaluate_rule(parse_rule("A>1 or B>1"), {"A": None, "B": 2})
    assert res.fired and res.missing_operand
    with pytest.raises(UnboundIdentifier, match="Z"):
        evaluate_rule(parse_rule("Z>1"), {"A": 1})
    # bindings are looked up case-insensitively
    assert evaluate_rule(parse_rule("pd_ins>0.5"), {"PD_Ins": 0.7}).fired


names = st.sampled_from(["A", "B", "PD_Ins", "x1"])
numbers = st.builds(lambda i, f, pct: f"{i},{f}%" if pct else f"{i}.{f}",
                    st.integers(0, 99), st.integers(0, 99), st.booleans())
operands = st.one_of(names, numbers)
ops = st.sampled_from(["<", "<=", ">", ">=", "=", "!="])
comparisons = st.builds(lambda a, o, b: f"{a}{o}{b}", operands, ops, operands)
exprs = st.recursive(
    comparisons,
    lambda inner: st.builds(lambda a, k, b: f"({a}) {k} ({b})", inner, st.sampled_from(["and", "or"]), inner),
    max_leaves=6)


@settings(max_examples=200, deadline=None)
@given(exprs)
def test_printer_round_trips(text):
    ast = parse_rule(text)
    printed = to_text(ast)
    assert parse_rule(printed) == ast
    assert to_text(parse_rule(printed)) == printed


@settings(max_examples=100, deadline=None)
@given(exprs, st.lists(st.one_of(st.none(), st.floats(-1, 100, allow_nan=False)), min_size=4, max_size=4))
def test_frame_evaluation_matches_scalar(text, vals):
    ast = parse_rule(text)
    env = dict(zip(["A", "B", "PD_Ins", "x1"], vals))
    frame = pd.DataFrame([{k: (np.nan if v is None else v) for k, v in env.items()}])
    fired, missing = evaluate_frame(ast, frame)
    res = evaluate_rule(ast, env)
    assert bool(fired[0]) == res.fired
    assert bool(missing[0]) == res.missing_operand


def test_number_text_normalised():
    n = parse_rule("A>27,24%").operands[1]
    assert n.text == "27.24%"
    assert math.isclose(n.value, 0.2724, rel_tol=0, abs_tol=1e-15)

import itertools
import math
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from creditlab.scorecard import (
    MODEL_NAMES,
    Bin,
    BinCoverageError,
    BinningSpec,
    Calibration,
    FitError,
    MetricError,
    ModelSuite,
    Scorecard,
    ScorecardFormatError,
    Variable,
    fit_scorecard,
    fixture_text,
    gini,
    lift,
    lift_table,
    load_fixture,
    predict,
    score,
    to_probability,
)
from creditlab.simkernel.config import Demographics

GOLDEN = Path(__file__).parent / "golden"
GOLDEN_FILES = {"PD_Ins": "pd_ins.json", "PD_Css": "pd_css.json",
                "Cross_PD_Css": "cross_pd_css.json", "PR_Css": "pr_css.json"}
# reference calibration lines of the shipped cards, (a, b)
CALIBRATION_LINES = {
    "PD_Ins": (-0.032205144, 9.4025558419),
    "PD_Css": (-0.028682728, 8.1960829753),
    "Cross_PD_Css": (-0.028954669, 8.2497434934),
    "PR_Css": (-0.035007455, 10.492092793),
}


def pairwise_gini(p, y):
    """O(n^2) concordance over all (bad, good) pairs, ties counting one half."""
    p = np.asarray(p, dtype=float)
    y = np.asarray(y, dtype=bool)
    bad, good = p[y], p[~y]
    conc = 0.0
    for b in bad:
        conc += np.sum(b > good) + 0.5 * np.sum(b == good)
    return 2.0 * conc / (len(bad) * len(good)) - 1.0


# ---------------------------------------------------------------- fixtures

@pytest.mark.parametrize("model", MODEL_NAMES)
def test_fixture_bytes_match_golden(model):
    assert fixture_text(model) == (GOLDEN / GOLDEN_FILES[model]).read_text(encoding="utf-8")


@pytest.mark.parametrize("model", MODEL_NAMES)
def test_fixture_round_trips(model):
    card = load_fixture(model)
    assert card.to_json() == fixture_text(model)
    assert Scorecard.from_json(card.to_json()) == card
    assert (card.calibration.a, card.calibration.b) == CALIBRATION_LINES[model]


@pytest.mark.parametrize("model", MODEL_NAMES)
def test_fixture_worst_bins_share_anchor(model):
    card = load_fixture(model)
    assert len({v.worst_points for v in card.variables}) == 1
    if model == "PD_Ins":
        assert card.variables[0].worst_points == -1


def test_pd_ins_fixture_examples():
    card = load_fixture("PD_Ins")
    assert len(card.variables) == 8
    assert sum(v.worst_points for v in card.variables) == -8
    sen = next(v for v in card.variables if v.name == "ACT_CINS_MIN_SENIORITY")
    assert sen.partial(pd.Series([np.nan]))[0] == 53
    cc = next(v for v in card.variables if v.name == "ACT_CC")
    assert cc.partial(pd.Series([0.248125937, 0.2481259371, 2.0])).tolist() == [61, 49, -1]


def test_fixture_suite_scores_abt_rows(tiny_world):
    from creditlab.abt import build_abt

    abt = build_abt(tiny_world)
    product = tiny_world.production["product"].to_numpy()
    suite = ModelSuite.fixtures()
    for name, card in suite.items():
        rows = abt[product == ("Css" if name == "PD_Css" else "Ins")]
        p = predict(rows, card)
        assert p.shape == (len(rows),)
        assert np.all((p > 0) & (p < 1))


def fuzz_values(var: Variable, rng):
    bounds = sorted({x for b in var.bins if b.kind == "interval" for x in (b.lo, b.hi) if x is not None})
    if bounds:
        pts = list(bounds) + [np.nextafter(x, np.inf) for x in bounds] + [np.nextafter(x, -np.inf) for x in bounds]
        pts += list(rng.uniform(min(bounds) - 100, max(bounds) + 100, 50))
        return pd.Series(pts + [np.nan])
    return None


@pytest.mark.parametrize("model", MODEL_NAMES)
def test_fixture_bins_cover_fuzzed_values(model, rng):
    card = load_fixture(model)
    d = Demographics()
    domains = {"APP_CHAR_JOB_CODE": list(d.job_code), "APP_CHAR_MARITAL_STATUS": list(d.marital_status)}
    for var in card.variables:
        vals = fuzz_values(var, rng)
        if vals is None:
            vals = pd.Series(domains[var.name], dtype=object)
        has_missing = any(b.kind == "missing" for b in var.bins)
        if not has_missing:
            vals = vals.dropna()
            if var.bins[0].kind == "interval":
                with pytest.raises(BinCoverageError):
                    var.partial(pd.Series([np.nan]))
        out = var.partial(vals)
        assert len(out) == len(vals)


def test_coverage_error_names_variable_and_value():
    var = Variable("x", (Bin("interval", 10, None, 0.0), Bin("interval", 20, 5.0, None)))
    with pytest.raises(BinCoverageError, match=r"x: value 2\.5"):
        var.partial(pd.Series([2.5]))


def test_single_variable_card():
    card = Scorecard("t", (Variable("x", (Bin("interval", 10, None, 0.0), Bin("interval", 20, 0.0, None))),),
                     Calibration(-0.1, 1.0))
    assert score({"x": -1}, card) == 10
    assert score({"X": 3}, card) == 20  # names are case-insensitive
    with pytest.raises(KeyError):
        score({"y": 1}, card)


def test_malformed_scorecards_rejected():
    with pytest.raises(ScorecardFormatError):
        Scorecard.from_dict({"name": "x", "variables": [{"name": "v", "bins": [
            {"condition": {"type": "missing"}, "points": 1.5}]}], "calibration": {"a": 0, "b": 0}})
    with pytest.raises(ScorecardFormatError):
        Scorecard.from_dict({"name": "x", "variables": []})
    with pytest.raises(ScorecardFormatError):
        Calibration(float("nan"), 0.0)


# ---------------------------------------------------------------- calibration

@pytest.mark.parametrize("model", MODEL_NAMES)
def test_to_probability_matches_reference_formula(model):
    a, b = CALIBRATION_LINES[model]
    cal = load_fixture(model).calibration
    pts = np.linspace(-100, 700, 100)
    direct = np.array([1.0 / (1.0 + math.exp(-(a * s + b))) for s in pts])
    np.testing.assert_allclose(to_probability(pts, cal), direct, rtol=1e-12, atol=0)


def test_to_probability_examples():
    cal = load_fixture("PD_Ins").calibration
    assert float(to_probability(-cal.b / cal.a, cal)) == pytest.approx(0.5, abs=1e-15)
    a, b = CALIBRATION_LINES["PD_Ins"]
    assert float(to_probability(292, cal)) == pytest.approx(1 / (1 + math.exp(-(a * 292 + b))), rel=1e-12)
    flat = Calibration(0.0, 0.7)
    assert np.all(to_probability([-50, 0, 900], flat) == 1 / (1 + math.exp(-0.7)))


@settings(max_examples=100, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.sampled_from(MODEL_NAMES))
def test_calibration_is_monotone(p1, p2, model):
    cal = load_fixture(model).calibration
    if p1 < p2:
        assert to_probability(p1, cal) >= to_probability(p2, cal)  # a < 0


# ---------------------------------------------------------------- metrics

def test_gini_examples():
    assert gini([0.3] * 4, [0, 1, 0, 1]) == 0.0
    assert gini([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    # six rows, one tie between a bad and a good
    p = [0.9, 0.7, 0.7, 0.4, 0.2, 0.1]
    y = [1, 1, 0, 0, 1, 0]
    assert gini(p, y) == pairwise_gini(p, y)
    assert gini(p, y) == pytest.approx(2 * (6.5 / 9) - 1)


def test_gini_matches_pairwise_oracle_on_samples():
    rng = np.random.default_rng(8)
    for k in range(3):
        n = 1000
        y = rng.random(n) < 0.3
        p = np.round(rng.normal(size=n) + y * 0.8, 1 + k)  # rounding creates ties
        assert gini(p, y) == pairwise_gini(p, y)


def test_gini_undefined_for_single_class():
    with pytest.raises(MetricError):
        gini([0.1, 0.2], [0, 0])
    with pytest.raises(MetricError):
        gini([0.1, 0.2], [1])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(-20, 20), st.booleans()), min_size=2, max_size=60))
def test_gini_invariant_under_monotone_transform(rows):
    p = np.array([r for r, _ in rows], dtype=float)
    y = np.array([b for _, b in rows])
    if y.all() or not y.any():
        return
    g = gini(p, y)
    assert gini(np.exp(p / 7.0), y) == pytest.approx(g, abs=1e-12)
    assert gini(p ** 3 + 2 * p, y) == pytest.approx(g, abs=1e-12)
    assert -1.0 <= g <= 1.0


def test_lift_examples():
    n = 1000
    y = np.zeros(n, dtype=bool)
    y[:10] = True
    p = -np.arange(n, dtype=float)  # first rows are the riskiest
    assert lift(p, y, 1) == pytest.approx(1 / 0.01)
    rng = np.random.default_rng(4)
    yr = rng.random(200000) < 0.2
    assert lift(rng.random(200000), yr, 20) == pytest.approx(1.0, abs=0.03)
    with pytest.raises(MetricError):
        lift(p, y, 0)


# ---------------------------------------------------------------- fitting

def test_fit_separating_variable_reaches_gini_one():
    x = np.r_[np.zeros(500), np.ones(500)]
    frame = pd.DataFrame({"x": x, "t": x.astype(int)})
    card = fit_scorecard(frame, "t")
    assert card.reported["gini_train"] == 1.0
    assert gini(predict(frame, card), frame["t"]) == 1.0


def test_fit_independent_target_has_no_power():
    rng = np.random.default_rng(9)
    n = 10000
    frame = pd.DataFrame({"a": rng.normal(size=n), "b": rng.integers(0, 5, n),
                          "c": rng.choice(["u", "v", "w"], n), "t": (rng.random(n) < 0.3).astype(int)})
    card = fit_scorecard(frame, "t")
    assert abs(gini(predict(frame, card), frame["t"])) < 0.05


def make_risky_frame(n=6000, seed=1):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=n)
    b = rng.normal(size=n)
    c = rng.choice(["low", "mid", "high"], n)
    m = np.where(rng.random(n) < 0.1, np.nan, rng.normal(size=n))
    logit = -0.5 + 1.2 * a - 0.7 * b + np.select([c == "high", c == "low"], [0.8, -0.8], 0.0)
    t = (rng.random(n) < 1 / (1 + np.exp(-logit))).astype(int)
    return pd.DataFrame({"a": a, "b": b, "c": c, "m": m, "t": t})


def test_fit_card_structure_and_anchor():
    frame = make_risky_frame()
    spec = BinningSpec()
    card = fit_scorecard(frame, "t", spec)
    names = card.variable_names
    assert {"a", "b", "c"} <= set(names)
    assert card.calibration.a < 0
    for v in card.variables:
        assert 2 <= len(v.bins) <= spec.max_bins + 1  # plus a missing bin
        assert v.worst_points == spec.anchor
        assert all(isinstance(b.points, int) for b in v.bins)
    assert card.reported["gini_train"] > 0.5
    assert gini(predict(frame, card), frame["t"]) == pytest.approx(card.reported["gini_train"], abs=0.02)
    # numeric bins partition the line, so any value scores
    fresh = make_risky_frame(500, seed=2)
    assert np.isfinite(predict(fresh, card)).all()


def test_fit_is_deterministic():
    frame = make_risky_frame(3000)
    assert fit_scorecard(frame, "t") == fit_scorecard(frame, "t")


def test_fit_errors():
    frame = pd.DataFrame({"x": [1.0, 2.0, 3.0], "t": [0, 0, 0]})
    with pytest.raises(FitError):
        fit_scorecard(frame, "t")
    with pytest.raises(FitError):
        fit_scorecard(frame.assign(t=[0, 1, np.nan]), "t")
    with pytest.raises(FitError):
        fit_scorecard(frame.assign(t=[0, 1, 2]), "t")


def test_lift_ordering_on_fitted_model():
    frame = make_risky_frame(20000, seed=5)
    card = fit_scorecard(frame, "t")
    lt = lift_table(predict(frame, card), frame["t"])
    vals = [lt[k] for k in (1, 5, 10, 20)]
    assert all(x >= y for x, y in itertools.pairwise(vals))


def test_suite_save_load_round_trip(tmp_path):
    suite = ModelSuite.fixtures()
    suite.save(tmp_path)
    assert ModelSuite.load(tmp_path) == suite
    with pytest.raises(TypeError):
        ModelSuite(*[None] * 4)

import numpy as np
import pandas as pd
import pytest

from creditlab.reports import (
    controlled_gini_scores,
    power_profit_experiment,
    stock_report,
    vintage_report,
)
from creditlab.scorecard import gini
from creditlab.simkernel import WorldDatasets
from creditlab.simkernel.generator import PRODUCTION_COLUMNS, TRANSACTION_COLUMNS


def one_loan_world():
    app = {c: 0 for c in PRODUCTION_COLUMNS}
    app.update(cid=0, aid=0, period=198001, app_loan_amount=1000.0, app_n_installments=3,
               app_installment=350.0, app_income=2000.0)
    snaps = pd.DataFrame(
        [[0, 0, 198001, 0, 0, 1, 2, "A"], [0, 0, 198002, 0, 0, 2, 1, "A"], [0, 0, 198003, 0, 0, 3, 0, "C"]],
        columns=TRANSACTION_COLUMNS)
    empty_p = pd.DataFrame(columns=PRODUCTION_COLUMNS)
    return WorldDatasets(pd.DataFrame([app]), empty_p, snaps, snaps.iloc[:0])


def test_vintage_matches_groupby(tiny_world):
    prod = tiny_world.production
    rep = vintage_report(prod)
    assert rep["n_accounts"].sum() == len(prod)
    for _, row in rep.sample(10, random_state=0).iterrows():
        sub = prod[prod["period"] == row["period"]]
        for k in (3, 6, 9, 12):
            assert row[f"default_{k}"] == pytest.approx(sub[f"default_{k}"].mean())
    # the three-instalment horizons are nested
    assert (rep["default_6"] <= rep["default_9"]).all()
    assert (rep["default_9"] <= rep["default_12"]).all()
    ins = vintage_report(prod, "Ins")
    assert ins["n_accounts"].sum() == (prod["product"] == "Ins").sum()


def test_vintage_without_defaults():
    prod = pd.DataFrame({"period": [198001, 198001, 198003], "product": ["Ins"] * 3,
                         **{f"default_{k}": [0, 0, 0] for k in (3, 6, 9, 12)}})
    rep = vintage_report(prod)
    assert rep["period"].tolist() == [198001, 198003]
    assert rep["n_accounts"].tolist() == [2, 1]
    assert (rep[[f"default_{k}" for k in (3, 6, 9, 12)]] == 0).all().all()


def test_stock_single_loan():
    rep = stock_report(one_loan_world())
    assert rep["period"].tolist() == [198001, 198002, 198003]
    assert rep["active_ins"].tolist() == [1, 1, 0]
    assert rep["active_css"].tolist() == [0, 0, 0]
    # no cash applications: zero response while active, missing otherwise
    assert rep["response_rate"].iloc[:2].tolist() == [0.0, 0.0]
    assert rep["response_rate"].iloc[2:].isna().all()


def test_stock_counts_match_snapshots(tiny_world):
    rep = stock_report(tiny_world).set_index("period")
    tx = tiny_world.transactions
    active = tx[tx["status"] == "A"].groupby("period").size()
    assert (rep.loc[active.index, "active"] == active).all()
    css = tiny_world.production.query("product == 'Css'").groupby("period").size()
    t = int(active.index[len(active) // 2])
    nxt = t + 1 if t % 100 < 12 else t + 89
    assert rep.loc[t, "response_rate"] == pytest.approx(css.get(nxt, 0) / active[t])


def test_controlled_scores():
    x = np.random.default_rng(1).normal(3, 2, 500)
    z = controlled_gini_scores(x, 0.0, 0)
    np.testing.assert_allclose(z, (x - x.mean()) / x.std(), rtol=1e-12)
    with pytest.raises(ValueError):
        controlled_gini_scores(x, 1.5, 0)
    y = (x + np.random.default_rng(2).normal(0, 1, 500) > 3).astype(float)
    assert gini(controlled_gini_scores(x, 1.0, 0), y) == pytest.approx(0.0, abs=0.15)


def test_power_experiment(tiny_world):
    rep = power_profit_experiment(tiny_world, (0.0, 0.5, 1.0))
    assert list(rep.columns) == ["noise", "gini", "best_profit", "best_acceptance_rate",
                                 "full_acceptance_profit", "delta_gini", "delta_profit",
                                 "delta_acceptance_rate"]
    assert rep["noise"].tolist() == [0.0, 0.5, 1.0]
    assert (np.diff(rep["gini"]) <= 0).all()
    assert rep.iloc[0][["delta_gini", "delta_profit", "delta_acceptance_rate"]].eq(0).all()
    # the best cut-off is never worse than accepting everyone
    assert (rep["best_profit"] >= rep["full_acceptance_profit"] - 1e-6).all()
    assert rep["full_acceptance_profit"].nunique() == 1

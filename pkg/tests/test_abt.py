import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from creditlab.abt import (
    ABT_COLUMNS,
    APP_FIELDS,
    WINDOW_SPECS,
    WindowSpec,
    build_abt,
    build_abt_row,
    customer_month_max,
    default_target,
    window_aggregate,
)
from creditlab.periods import add_months, months_between

PCODE = {"Css": "C", "Ins": "I"}
TAG = {"C": "ccss", "I": "cins"}


# ---------------------------------------------------------------- brute-force oracle

def oracle_row(app: dict, accounts: pd.DataFrame, snaps: pd.DataFrame) -> dict:
    """Every ABT field from plain loops over one customer's visible accounts and snapshots."""
    t0 = int(app["period"])
    inc, spend = app["app_income"], app["app_spendings"]
    is_css = app["product"] == "Css"
    out = {"cid": app["cid"], "aid": app["aid"], "period": t0, "act_age": app["age"],
           "act_cc": (app["app_installment"] + spend) / inc,
           "act_loaninc": app["app_loan_amount"] / inc}
    for f in APP_FIELDS:
        out[f] = app[f]
    acc = {int(r["cid"]): r for r in accounts.to_dict("records")}
    past = [r for r in acc.values() if int(r["period"]) < t0]
    earlier = [s for s in snaps.to_dict("records") if int(s["period"]) < t0]

    counts = {}
    for p in ("C", "I"):
        mine = [r for r in past if PCODE[r["product"]] == p]
        n = len(mine)
        counts[p] = n
        tag = TAG[p]
        out[f"act_{tag}_n_loans_hist"] = n
        if n:
            opens = [months_between(int(r["period"]), t0) for r in mine]
            out[f"act_{tag}_seniority"] = max(opens)
            out[f"act_{tag}_min_seniority"] = min(opens)
            closed = [s for s in earlier if PCODE[acc[int(s["cid"])]["product"]] == p]
            out[f"act_{tag}_n_statB"] = sum(1 for s in closed if s["status"] == "B")
            out[f"act_{tag}_n_statC"] = sum(1 for s in closed if s["status"] == "C")
        else:
            for k in ("seniority", "min_seniority", "n_statB", "n_statC"):
                out[f"act_{tag}_{k}"] = math.nan
    out["act_call_n_loan"] = counts["C"] + counts["I"] + 1
    out["act_ccss_n_loan"] = counts["C"] + int(is_css)
    out["act_cins_n_loan"] = counts["I"] + int(not is_css)

    prev = add_months(t0, -1)
    active = [s for s in earlier if int(s["period"]) == prev and s["status"] == "A"]
    cents = {}
    for p in ("C", "I"):
        tag = TAG[p]
        rows = [s for s in active if PCODE[acc[int(s["cid"])]["product"]] == p]
        n_inst = sum(int(acc[int(s["cid"])]["app_n_installments"]) for s in rows)
        cents[p] = sum(int(round(acc[int(s["cid"])]["app_installment"] * 100)) for s in rows)
        out[f"act_{tag}_n_loans_act"] = len(rows)
        out[f"act_{tag}_cc"] = (cents[p] / 100.0 + spend) / inc
        if rows:
            out[f"act_{tag}_maxdue"] = max(int(s["due_installments"]) for s in rows)
            out[f"act_{tag}_utl"] = sum(int(s["left_installments"]) for s in rows) / n_inst
            out[f"act_{tag}_dueutl"] = sum(int(s["due_installments"]) for s in rows) / n_inst
            out[f"act_{tag}_min_lninst"] = min(int(s["left_installments"]) for s in rows)
            out[f"act_{tag}_min_pninst"] = min(int(s["paid_installments"]) for s in rows)
        else:
            for k in ("maxdue", "utl", "dueutl", "min_lninst", "min_pninst"):
                out[f"act_{tag}_{k}"] = math.nan
    app_cents = int(round(app["app_installment"] * 100))
    out["act_call_cc"] = ((cents["C"] + cents["I"] + app_cents) / 100.0 + spend) / inc
    out["act_cus_active"] = int(bool(active))

    # month -> snapshots of the twelve months before t0
    months = [add_months(t0, -i) for i in range(12, 0, -1)]
    by_month = {m: [s for s in earlier if int(s["period"]) == m] for m in months}
    for k in (3, 6, 9, 12):
        win = months[12 - k:]
        if not any(by_month[m] for m in win):
            for f in ("n_arrears", "n_arrears_days", "n_good_days"):
                out[f"act{k}_{f}"] = math.nan
            continue
        out[f"act{k}_n_arrears"] = sum(1 for m in win if any(s["due_installments"] > 0 for s in by_month[m]))
        out[f"act{k}_n_arrears_days"] = sum(1 for m in win for s in by_month[m] if s["due_installments"] > 0)
        out[f"act{k}_n_good_days"] = sum(1 for m in win for s in by_month[m] if s["due_installments"] == 0)

    for spec in WINDOW_SPECS:
        win = months[12 - spec.window:]
        vals = []
        for m in win:
            ds = [int(s["due_installments"]) for s in by_month[m]
                  if spec.product == "A" or PCODE[acc[int(s["cid"])]["product"]] == spec.product]
            v = max(ds) if ds else None
            if v is not None and spec.measure == "Days":
                v *= 30
            vals.append(v)
        known = [v for v in vals if v is not None]
        if not known:
            out[spec.name] = math.nan
            continue
        use = known if spec.missing_mode == "agr" else [0 if v is None else v for v in vals]
        if spec.statistic == "Max":
            out[spec.name] = max(use)
        elif spec.statistic == "Min":
            out[spec.name] = min(use)
        else:
            out[spec.name] = sum(use) / len(use)
    return out


def same(a, b) -> bool:
    if isinstance(a, str) or isinstance(b, str):
        return a == b
    if pd.isna(a) or pd.isna(b):
        return pd.isna(a) and pd.isna(b)
    return float(a) == float(b)


def mismatches(a, b) -> list:
    return [c for c in ABT_COLUMNS if not same(a[c], b[c])]


def customer_view(world, aid):
    prod = world.production
    tx = world.transactions
    return prod[prod["aid"] == aid], tx[tx["aid"] == aid]


# ---------------------------------------------------------------- examples

def test_column_contract(toy_world):
    assert len(ABT_COLUMNS) == 204 and len(set(ABT_COLUMNS)) == 204
    abt = build_abt(toy_world, with_targets=False)
    assert list(abt.columns) == ABT_COLUMNS
    assert len(abt) == len(toy_world.production)


def test_customer_month_max_examples():
    snaps = [
        {"period": 198001, "product": "Ins", "due_installments": 0},
        {"period": 198001, "product": "Ins", "due_installments": 2},
        {"period": 198001, "product": "Css", "due_installments": 4},
        {"period": 198002, "product": "Css", "due_installments": 1},
        {"period": 198002, "product": "Ins", "due_installments": 3},
    ]
    assert customer_month_max(snaps, 197912, "A", "Due") is None
    assert customer_month_max(snaps, 198001, "I", "Due") == 2
    assert customer_month_max(snaps, 198001, "C", "Days") == 120
    for period in (198001, 198002):
        c = customer_month_max(snaps, period, "C", "Due")
        i = customer_month_max(snaps, period, "I", "Due")
        assert customer_month_max(snaps, period, "A", "Due") == max(c, i)


def test_window_aggregate_examples():
    full = {add_months(198001, i): v for i, v in enumerate([0, 1, 2, 3] * 3)}
    assert window_aggregate(full, WindowSpec("Max", 12, "Due", "A", "ags"), 198101) == 3
    gap = {197910: 1, 197911: None, 197912: 2}
    agr = WindowSpec("Mean", 3, "Due", "A", "agr")
    ags = WindowSpec("Mean", 3, "Due", "A", "ags")
    assert window_aggregate(gap, agr, 198001) == 1.5
    assert window_aggregate(gap, ags, 198001) == 1.0  # the gap month counts as zero
    assert window_aggregate({}, agr, 198001) is None
    assert window_aggregate({}, ags, 198001) is None
    assert window_aggregate({198001: 5}, agr, 198001) is None  # as_of month itself excluded
    assert window_aggregate(gap, WindowSpec("Min", 3, "Due", "A", "ags"), 198001) == 0
    assert window_aggregate(gap, WindowSpec("Min", 3, "Due", "A", "agr"), 198001) == 1


def test_default_target_examples():
    path = [0, 1, 2, 3]
    assert default_target(path, 6) and default_target(path, 3)
    assert not any(default_target([0] * 12, k) for k in (3, 6, 9, 12))
    late = [0] * 9 + [3, 3, 3]
    assert not default_target(late, 9) and default_target(late, 12)
    with pytest.raises(ValueError):
        default_target([], 3)


def test_first_application_has_empty_history(toy_world):
    prod = toy_world.production
    first = prod.sort_values(["aid", "period", "cid"]).drop_duplicates("aid")
    first = first[first["product"] == "Ins"].iloc[0]
    row = build_abt_row(first, toy_world.transactions.iloc[:0])
    assert row["act_call_n_loan"] == 1 and row["act_cins_n_loan"] == 1
    hist = [c for c in ABT_COLUMNS if c.startswith(("ags", "agr", "act_ccss_m", "act_cins_m"))]
    assert row[hist].isna().all()
    assert row["act_cins_n_loans_hist"] == 0 and row["act_cus_active"] == 0


def test_closed_ins_loan_counts():
    app = {"cid": 5, "aid": 0, "period": 198006, "product": "Ins", "age": 40.0,
           **{f: 1 for f in APP_FIELDS}, "app_income": 1000.0}
    accounts = pd.DataFrame([{"cid": 1, "aid": 0, "period": 198001, "product": "Ins",
                              "app_n_installments": 2, "app_installment": 50.0}])
    snaps = pd.DataFrame([
        {"cid": 1, "aid": 0, "period": 198001, "due_installments": 0, "days_past_due": 0,
         "paid_installments": 1, "left_installments": 1, "status": "A"},
        {"cid": 1, "aid": 0, "period": 198002, "due_installments": 0, "days_past_due": 0,
         "paid_installments": 2, "left_installments": 0, "status": "C"},
    ])
    row = build_abt_row(app, snaps, visible_accounts=accounts)
    assert row["act_cins_n_statC"] == 1 and row["act_cins_n_statB"] == 0
    assert pd.isna(row["act_ccss_n_statC"])
    assert row["act_cins_seniority"] == 5
    assert row["agr3_Max_CMaxA_Due"] != row["agr3_Max_CMaxA_Due"]  # nothing in the last 3 months
    assert row["agr6_Max_CMaxI_Due"] == 0
    with pytest.raises(ValueError):
        build_abt_row({**app, "aid": 1}, snaps, visible_accounts=accounts)


# ---------------------------------------------------------------- oracle comparisons

def test_all_variables_match_brute_force(toy_world):
    prod = toy_world.production
    n_checked = 0
    for aid in sorted(prod["aid"].unique()):
        accounts, snaps = customer_view(toy_world, aid)
        for _, app in accounts.iterrows():
            row = build_abt_row(app, snaps, visible_accounts=accounts)
            want = oracle_row(app.to_dict(), accounts, snaps)
            assert set(want) == set(ABT_COLUMNS)
            bad = [c for c in ABT_COLUMNS if not same(row[c], want[c])]
            assert not bad, (int(app["cid"]), [(c, row[c], want[c]) for c in bad[:5]])
            n_checked += 1
    assert n_checked >= 50


def test_vectorised_table_matches_row_builder(toy_world):
    abt = build_abt(toy_world, with_targets=False)
    prod = toy_world.production
    for i in range(0, len(prod), max(1, len(prod) // 40)):
        app = prod.iloc[i]
        accounts, snaps = customer_view(toy_world, app["aid"])
        row = build_abt_row(app, snaps, visible_accounts=accounts)
        assert not mismatches(abt.iloc[i], row)


def test_hidden_loan_changes_fields_like_a_subset(toy_world):
    prod = toy_world.production
    counts = prod.groupby("aid").size()
    aid = int(counts.idxmax())
    accounts, snaps = customer_view(toy_world, aid)
    app = accounts.sort_values("period").iloc[-1]
    earlier = accounts[accounts["period"] < app["period"]]
    hidden = int(earlier["cid"].iloc[0])
    acc_vis = accounts[accounts["cid"] != hidden]
    snap_vis = snaps[snaps["cid"] != hidden]
    full_row = build_abt_row(app, snaps, visible_accounts=accounts)
    part_row = build_abt_row(app, snap_vis, visible_accounts=acc_vis)
    want = oracle_row(app.to_dict(), acc_vis, snap_vis)
    assert not mismatches(part_row, want)
    assert part_row["act_call_n_loan"] == full_row["act_call_n_loan"] - 1
    for c in [s.name for s in WINDOW_SPECS if s.statistic == "Max" and s.missing_mode == "agr"]:
        if not pd.isna(part_row[c]):
            assert part_row[c] <= full_row[c]


def test_no_look_ahead(toy_world):
    prod = toy_world.production
    rng = np.random.default_rng(0)
    for aid in sorted(prod["aid"].unique())[:20]:
        accounts, snaps = customer_view(toy_world, aid)
        for _, app in accounts.iterrows():
            base = build_abt_row(app, snaps, visible_accounts=accounts)
            shuffled = snaps.sample(frac=1.0, random_state=int(rng.integers(1 << 30)))
            assert not mismatches(base, build_abt_row(app, shuffled, visible_accounts=accounts))
            past = snaps[snaps["period"] < app["period"]]
            assert not mismatches(base, build_abt_row(app, past, visible_accounts=accounts))
            future = snaps["period"] >= app["period"]
            tampered = snaps.copy()
            tampered.loc[future, "due_installments"] = 6
            tampered.loc[future, "status"] = "A"
            assert not mismatches(base, build_abt_row(app, tampered, visible_accounts=accounts))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.one_of(st.none(), st.integers(0, 7)), min_size=12, max_size=12),
       st.sampled_from(["Max", "Mean", "Min"]), st.sampled_from([3, 6, 9, 12]))
def test_window_modes_agree_without_gaps(vals, stat, k):
    series = {add_months(198001, i): v for i, v in enumerate(vals)}
    agr = window_aggregate(series, WindowSpec(stat, k, "Due", "A", "agr"), 198101)
    ags = window_aggregate(series, WindowSpec(stat, k, "Due", "A", "ags"), 198101)
    window = vals[12 - k:]
    if all(v is None for v in window):
        assert agr is None and ags is None
    elif all(v is not None for v in window):
        assert agr == ags
    else:
        assert agr is not None and ags is not None
        if stat == "Max":
            assert ags == agr
        elif stat == "Min":
            assert ags == 0
        else:
            assert ags <= agr

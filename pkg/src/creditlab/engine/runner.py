"""Strategy runs over the universe with bank-visibility semantics.

Months are processed in order.  Every application of the month is scored
from the bank's current view (accounts accepted so far, each inserted with
its whole pre-generated history; queries only read earlier months).  A
cash application whose customer has no visible status-A account in the
previous month is declined as "Not known customer" before any rule runs.

With ``information="full"`` every application is scored from the
full-universe table and the rules apply to all of them with no visibility
filter: no cash application is declined as "Not known customer".  That run
gives the full-information ("expected") profit of a strategy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from creditlab.abt import ABT_COLUMNS, HistoryStore, build_abt, world_frame
from creditlab.engine.strategy import ACCEPTED, NOT_KNOWN, PRODUCTS, Strategy
from creditlab.finance import CSS_PRICING, INS_PRICING, loan_cents
from creditlab.periods import to_index
from creditlab.scorecard import MODEL_NAMES, MetricError, ModelSuite, gini, predict
from creditlab.training import model_targets

DEFAULT_PRICING = {"Ins": INS_PRICING, "Css": CSS_PRICING}
REPORT_SPLIT = 198712


def score_frame(suite: ModelSuite, abt: pd.DataFrame) -> pd.DataFrame:
    return pd.DataFrame({name: predict(abt, card) for name, card in suite.items()}, index=abt.index)


def full_information(world, suite: ModelSuite) -> pd.DataFrame:
    """Full-universe ABT joined with the four model probabilities, aligned to ``world.production``."""
    abt = build_abt(world, with_targets=False)
    return pd.concat([abt, score_frame(suite, abt)], axis=1)


def _window(world, periods):
    prod = world.production
    if periods is None:
        return int(prod["period"].min()), int(prod["period"].max())
    return int(periods[0]), int(periods[1])


@dataclass
class BankView:
    """Accounts visible to the bank after a run."""

    store: HistoryStore
    accepted_cids: np.ndarray
    world: object = field(repr=False, default=None)

    @property
    def accounts(self) -> pd.DataFrame:
        prod = self.world.production
        return prod[prod["cid"].isin(self.accepted_cids)].reset_index(drop=True)

    @property
    def transactions(self) -> pd.DataFrame:
        tx = self.world.transactions
        return tx[tx["cid"].isin(self.accepted_cids)].reset_index(drop=True)


@dataclass
class StrategyReport:
    strategy_id: str
    decisions: pd.DataFrame  # one row per application in the window
    products: dict  # product -> decision table
    periods: pd.DataFrame
    averages: pd.DataFrame
    gini: pd.DataFrame

    @property
    def accepted_profit(self) -> float:
        return self.accepted_profit_cents / 100.0

    @property
    def accepted_profit_cents(self) -> int:
        d = self.decisions
        acc = d["accepted"].to_numpy()
        return int(d["income_cents"].to_numpy()[acc].sum() - d["loss_cents"].to_numpy()[acc].sum())

    def summary(self) -> dict:
        d = self.decisions
        out = {"strategy": self.strategy_id, "accepted_profit": self.accepted_profit}
        for p in PRODUCTS:
            m = (d["product"] == p).to_numpy()
            out[f"acceptance_rate_{p}"] = float(d["accepted"].to_numpy()[m].mean()) if m.any() else float("nan")
            shares = d.loc[m, "reason"].value_counts(normalize=True)
            out[f"reasons_{p}"] = {k: float(v) for k, v in shares.items()}
        return out


def _tx_index(tx: pd.DataFrame):
    cids = tx["cid"].to_numpy(np.int64)
    order = np.argsort(cids, kind="stable")
    return order, cids[order]


def run_decisions(world, suite: ModelSuite, strategy: Strategy, periods=None, *,
                  information: str = "bank", full: pd.DataFrame | None = None,
                  pricing: dict | None = None, accept_mask=None):
    """Month-by-month decisions; returns ``(decisions, store)``.

    ``accept_mask`` (boolean, aligned to ``world.production``) replaces the
    rules with a fixed accept/decline choice, e.g. random acceptance; the
    "Not known customer" check still applies in bank mode.  In full mode the
    store is ``None``.
    """
    if information not in ("bank", "full"):
        raise ValueError("information must be 'bank' or 'full'")
    pricing = pricing or DEFAULT_PRICING
    strategy.validate(list(ABT_COLUMNS) + list(MODEL_NAMES))
    prod = world.production
    if information == "full" and full is None:
        full = full_information(world, suite)
    lo, hi = _window(world, periods)
    in_window = ((prod["period"] >= lo) & (prod["period"] <= hi)).to_numpy()
    if information == "full":
        return _full_decisions(prod, full, strategy, in_window, pricing, accept_mask), None
    frame_dims = world_frame(world)
    store = HistoryStore(*frame_dims)
    origin = frame_dims[2]
    tx = world.transactions
    tx_order, tx_sorted = _tx_index(tx)

    idx_all = np.flatnonzero(in_window)
    t_all = to_index(prod["period"].to_numpy(np.int64)[idx_all], origin)
    reason = np.full(len(prod), "", dtype=object)
    flagged = np.zeros(len(prod), dtype=bool)
    scores = np.full((len(prod), len(MODEL_NAMES)), np.nan)
    for t in np.unique(t_all):
        rows = idx_all[t_all == t]
        apps = prod.iloc[rows]
        abt = store.build(apps)
        sc = score_frame(suite, abt)
        env = pd.concat([abt, sc], axis=1)
        scores[rows] = sc[list(MODEL_NAMES)].to_numpy()
        is_css = (apps["product"] == "Css").to_numpy()
        active = np.unique(store.active_rows(int(t) - 1)[:, 0]) if t > 0 else np.empty(0, np.int64)
        known = np.isin(apps["aid"].to_numpy(np.int64), active)
        r = np.full(len(rows), ACCEPTED, dtype=object)
        f = np.zeros(len(rows), dtype=bool)
        for product, mask in (("Ins", ~is_css), ("Css", is_css & known)):
            if not mask.any():
                continue
            if accept_mask is not None:
                ok = np.asarray(accept_mask)[rows[mask]]
                r[mask] = np.where(ok, ACCEPTED, "Random decline")
            else:
                rr, ff = strategy.decide(product, env[mask].reset_index(drop=True))
                r[mask], f[mask] = rr, ff
        r[is_css & ~known] = NOT_KNOWN
        reason[rows] = r
        flagged[rows] = f
        acc = rows[r == ACCEPTED]
        if len(acc):
            acc_cids = prod["cid"].to_numpy(np.int64)[acc]
            lo_i = np.searchsorted(tx_sorted, acc_cids, side="left")
            hi_i = np.searchsorted(tx_sorted, acc_cids, side="right")
            take = np.concatenate([tx_order[a:b] for a, b in zip(lo_i, hi_i)])
            store.add(prod.iloc[acc], tx.iloc[np.sort(take)])

    return _decision_frame(prod, in_window, reason, flagged, scores, pricing), store


def _full_decisions(prod, full, strategy, in_window, pricing, accept_mask):
    """Rules over every application at once; decisions are row-independent without visibility."""
    reason = np.full(len(prod), "", dtype=object)
    flagged = np.zeros(len(prod), dtype=bool)
    is_css = (prod["product"] == "Css").to_numpy()
    for product, mask in (("Ins", ~is_css & in_window), ("Css", is_css & in_window)):
        if not mask.any():
            continue
        if accept_mask is not None:
            ok = np.asarray(accept_mask)[mask]
            reason[mask] = np.where(ok, ACCEPTED, "Random decline")
        else:
            rr, ff = strategy.decide(product, full[mask].reset_index(drop=True))
            reason[mask], flagged[mask] = rr, ff
    scores = full[list(MODEL_NAMES)].to_numpy(float)
    return _decision_frame(prod, in_window, reason, flagged, scores, pricing)


def _decision_frame(prod, in_window, reason, flagged, scores, pricing) -> pd.DataFrame:
    dec = prod.loc[in_window, ["cid", "aid", "period", "product", "app_loan_amount",
                               "app_n_installments", "default_12"]].copy()
    dec["reason"] = reason[in_window]
    dec["accepted"] = dec["reason"] == ACCEPTED
    dec["missing_operand"] = flagged[in_window]
    for j, name in enumerate(MODEL_NAMES):
        dec[name] = scores[in_window, j]
    inc = np.zeros(len(dec), dtype=np.int64)
    los = np.zeros(len(dec), dtype=np.int64)
    for product in PRODUCTS:
        m = (dec["product"] == product).to_numpy()
        i_, l_ = loan_cents(dec["app_loan_amount"].to_numpy()[m], dec["app_n_installments"].to_numpy()[m],
                            dec["default_12"].to_numpy()[m].astype(bool), pricing[product])
        inc[m], los[m] = i_, l_
    dec["income_cents"] = inc
    dec["loss_cents"] = los
    return dec.reset_index(drop=True)


def _reason_order(strategy: Strategy, product: str, present) -> list[str]:
    order = [NOT_KNOWN] if product == "Css" else []
    order += [r.name for r in strategy.for_product(product)]
    extra = sorted(set(present) - set(order) - {ACCEPTED})
    return order + extra + [ACCEPTED]


def decision_table(dec: pd.DataFrame, strategy: Strategy, product: str) -> pd.DataFrame:
    d = dec[dec["product"] == product]
    n_all = len(d)
    rows = []
    for label in _reason_order(strategy, product, d["reason"].unique()) + ["All"]:
        part = d if label == "All" else d[d["reason"] == label]
        if label != "All" and label != ACCEPTED and len(part) == 0:
            continue
        rows.append({
            "rule": label,
            "n_applications": len(part),
            "share": len(part) / n_all if n_all else float("nan"),
            "loan_amount": float(part["app_loan_amount"].sum()),
            "risk": float(part["default_12"].mean()) if len(part) else float("nan"),
            "profit": (int(part["income_cents"].sum()) - int(part["loss_cents"].sum())) / 100.0,
        })
    return pd.DataFrame(rows)


def period_table(dec: pd.DataFrame, split: int = REPORT_SPLIT) -> pd.DataFrame:
    acc = dec[dec["accepted"]]
    lo, hi = int(dec["period"].min()), int(dec["period"].max())
    spans = [(lo, min(split, hi)), (max(lo, split + 1), hi)] if lo <= split < hi else [(lo, hi)]
    rows = []
    for a, b in spans:
        part = acc[(acc["period"] >= a) & (acc["period"] <= b)]
        inc, los = int(part["income_cents"].sum()), int(part["loss_cents"].sum())
        rows.append({"period": f"{a}-{b}", "income": inc / 100.0, "loss": los / 100.0,
                     "profit": (inc - los) / 100.0})
    return pd.DataFrame(rows)


def _model_rows(world, dec: pd.DataFrame):
    """Per model: (mask over dec rows, target array, accepted-observable mask)."""
    tg = model_targets(world).set_index("cid")
    is_ins = (dec["product"] == "Ins").to_numpy()
    is_css = ~is_ins
    acc = dec["accepted"].to_numpy()
    y12 = dec["default_12"].to_numpy(float)
    ins_t = tg.reindex(dec["cid"].to_numpy())
    response = ins_t["response"].to_numpy(float)
    cross = ins_t["cross_default_12"].to_numpy(float)
    # cross outcome is observable only when the attributed first cash loan was accepted
    first_css_accepted = _first_css_accepted(world, dec)
    return {
        "PD_Ins": (is_ins, y12, is_ins & acc),
        "PD_Css": (is_css, y12, is_css & acc),
        "Cross_PD_Css": (is_ins & ~np.isnan(cross), cross, is_ins & acc & ~np.isnan(cross) & first_css_accepted),
        "PR_Css": (is_ins, response, is_ins & acc),
    }


def _first_css_accepted(world, dec: pd.DataFrame) -> np.ndarray:
    from creditlab.training import attribute_css

    css = world.css_production
    owner = attribute_css(world.ins_production, css)
    linked = (css.assign(ins_cid=owner)[owner >= 0].sort_values(["period", "cid"], kind="stable")
              .drop_duplicates("ins_cid", keep="first"))
    acc = dec.set_index("cid")["accepted"]
    ok = linked["cid"].map(acc).eq(True).to_numpy()
    first_ok = pd.Series(ok, index=linked["ins_cid"].to_numpy())
    return first_ok.reindex(dec["cid"].to_numpy()).eq(True).to_numpy()


def _safe_gini(p, y) -> float:
    try:
        return gini(p, y)
    except MetricError:
        return float("nan")


def gini_table(world, dec: pd.DataFrame) -> pd.DataFrame:
    rows = []
    for name, (all_mask, y, acc_mask) in _model_rows(world, dec).items():
        p = dec[name].to_numpy()
        rows.append({"model": name,
                     "accepted": _safe_gini(p[acc_mask], y[acc_mask]),
                     "all": _safe_gini(p[all_mask], y[all_mask]),
                     "n_accepted": int(acc_mask.sum()), "n_all": int(all_mask.sum())})
    return pd.DataFrame(rows)


def averages_table(dec: pd.DataFrame) -> pd.DataFrame:
    is_ins = (dec["product"] == "Ins").to_numpy()
    combined = np.where(is_ins, dec["PD_Ins"].to_numpy(), dec["PD_Css"].to_numpy())
    acc = dec["accepted"].to_numpy()

    def mean(v, m):
        return float(np.mean(v[m])) if m.any() else float("nan")

    rows = [
        ("PD (combined PD_Ins and PD_Css)", mean(combined, acc), mean(combined, np.ones_like(acc))),
        ("PR_Css", mean(dec["PR_Css"].to_numpy(), acc & is_ins), mean(dec["PR_Css"].to_numpy(), is_ins)),
        ("Cross_PD_Css", mean(dec["Cross_PD_Css"].to_numpy(), acc & is_ins),
         mean(dec["Cross_PD_Css"].to_numpy(), is_ins)),
    ]
    return pd.DataFrame(rows, columns=["parameter", "accepted", "all"])


def build_report(world, strategy: Strategy, dec: pd.DataFrame) -> StrategyReport:
    return StrategyReport(
        strategy_id=strategy.id,
        decisions=dec,
        products={p: decision_table(dec, strategy, p) for p in PRODUCTS},
        periods=period_table(dec),
        averages=averages_table(dec),
        gini=gini_table(world, dec),
    )


def run_strategy(world, suite: ModelSuite, strategy: Strategy, periods=None, *,
                 pricing: dict | None = None, accept_mask=None) -> tuple[BankView, StrategyReport]:
    """Run a strategy on bank-visible data and report it."""
    dec, store = run_decisions(world, suite, strategy, periods, pricing=pricing, accept_mask=accept_mask)
    view = BankView(store, dec.loc[dec["accepted"], "cid"].to_numpy(), world)
    return view, build_report(world, strategy, dec)


@dataclass
class RejectInferenceReport:
    expected_cents: int
    realized_cents: int
    expected_report: StrategyReport
    realized_report: StrategyReport

    @property
    def expected(self) -> float:
        return self.expected_cents / 100.0

    @property
    def realized(self) -> float:
        return self.realized_cents / 100.0

    @property
    def gap(self) -> float:
        return (self.expected_cents - self.realized_cents) / 100.0

    @property
    def relative_gap(self) -> float:
        if self.expected_cents == 0:
            return float("nan")
        return (self.expected_cents - self.realized_cents) / abs(self.expected_cents)

    def decline_shares(self) -> dict:
        return self.realized_report.summary()

    def to_dict(self) -> dict:
        return {"expected_profit": self.expected, "realized_profit": self.realized,
                "gap": self.gap, "relative_gap": self.relative_gap,
                "realized": self.realized_report.summary(),
                "expected": self.expected_report.summary()}


def expected_vs_realized(world, suite: ModelSuite, strategy: Strategy, periods=None, *,
                         full: pd.DataFrame | None = None,
                         pricing: dict | None = None) -> RejectInferenceReport:
    """Full-information profit (no visibility filter) against the bank-visible run."""
    if full is None:
        full = full_information(world, suite)
    exp_dec, _ = run_decisions(world, suite, strategy, periods, information="full", full=full,
                               pricing=pricing)
    real_dec, _ = run_decisions(world, suite, strategy, periods, pricing=pricing)
    exp_rep = build_report(world, strategy, exp_dec)
    real_rep = build_report(world, strategy, real_dec)
    return RejectInferenceReport(exp_rep.accepted_profit_cents, real_rep.accepted_profit_cents,
                                 exp_rep, real_rep)


def model_power_report(world, report: StrategyReport) -> pd.DataFrame:
    """Gini per model on the accepted subset and on all applications (bank-visible scores)."""
    return gini_table(world, report.decisions)

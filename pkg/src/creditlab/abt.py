"""Analytical base table: 204 variables per application at decision time.

History is held in a :class:`HistoryStore` of customer x month panels.
Accounts are inserted with their whole (pre-generated) history; every query
only reads months strictly before the application month, so inserting an
account early never leaks future information into an earlier decision.
The same store backs the full-universe table (everything inserted) and the
bank's view during a strategy run (only accepted accounts inserted).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from creditlab.periods import from_index, to_index

PRODUCTS = ("C", "I")  # Css, Ins
PRODUCT_OF = {"Css": "C", "Ins": "I"}
WINDOWS_ORDER = (12, 3, 6, 9)
WINDOWS = (3, 6, 9, 12)
STATS = ("Max", "Mean", "Min")
MODES = ("ags", "agr")
MEASURES = ("Days", "Due")
CLASSES = ("C", "I", "A")

APP_FIELDS = [
    "app_income", "app_loan_amount", "app_n_installments", "app_number_of_children",
    "app_spendings", "app_installment", "app_char_branch", "app_char_gender",
    "app_char_job_code", "app_char_marital_status", "app_char_city",
    "app_char_home_status", "app_char_cars",
]

BASE_COLUMNS = (
    ["cid", "aid", "period", "act_age", "act_cc", "act_loaninc"]
    + APP_FIELDS
    + ["act_call_n_loan", "act_ccss_n_loan", "act_cins_n_loan",
       "act_ccss_maxdue", "act_cins_maxdue", "act_ccss_n_loans_act", "act_cins_n_loans_act",
       "act_ccss_utl", "act_cins_utl", "act_call_cc", "act_ccss_cc", "act_cins_cc",
       "act_ccss_dueutl", "act_cins_dueutl", "act_cus_active",
       "act_ccss_n_statB", "act_cins_n_statB", "act_ccss_n_statC", "act_cins_n_statC",
       "act_ccss_n_loans_hist", "act_cins_n_loans_hist",
       "act_ccss_min_lninst", "act_cins_min_lninst", "act_ccss_min_pninst", "act_cins_min_pninst",
       "act_ccss_min_seniority", "act_cins_min_seniority"]
    + [f"act{k}_n_arrears" for k in WINDOWS]
    + [f"act{k}_n_arrears_days" for k in WINDOWS]
    + [f"act{k}_n_good_days" for k in WINDOWS]
    + ["act_ccss_seniority", "act_cins_seniority"]
)


@dataclass(frozen=True)
class WindowSpec:
    statistic: str
    window: int
    measure: str
    product: str
    missing_mode: str

    @property
    def name(self) -> str:
        return f"{self.missing_mode}{self.window}_{self.statistic}_CMax{self.product}_{self.measure}"


WINDOW_SPECS = [
    WindowSpec(stat, k, meas, prod, mode)
    for stat in STATS for k in WINDOWS_ORDER for mode in MODES
    for meas in MEASURES for prod in CLASSES
]
WINDOW_COLUMNS = [s.name for s in WINDOW_SPECS]
ABT_COLUMNS = BASE_COLUMNS + WINDOW_COLUMNS
assert len(ABT_COLUMNS) == 204
TARGET_COLUMNS = ["default_3", "default_6", "default_9", "default_12"]

_STATUS_CODE = {"A": 0, "B": 1, "C": 2}


def default_target(due_path, horizon: int) -> bool:
    """True iff the due count reaches the threshold within ``horizon`` months.

    The threshold is 2 due instalments for the 3-month horizon and 3 for the
    others.  ``due_path`` starts at the first month on book.
    """
    path = list(due_path)
    if not path:
        raise ValueError("default target undefined for an empty history")
    thr = 2 if horizon == 3 else 3
    return any(d >= thr for d in path[:horizon])


def customer_month_max(snapshots, period: int, product: str, measure: str):
    """Max of ``measure`` over one customer's accounts present in ``period``.

    ``snapshots`` is an iterable of dicts/rows with keys ``period``,
    ``product`` ('Ins'/'Css'), ``due_installments``.  ``product`` is C, I or A.
    Returns ``None`` when no account of the class has a snapshot that month.
    """
    vals = []
    for s in snapshots:
        if s["period"] != period:
            continue
        if product != "A" and PRODUCT_OF[s["product"]] != product:
            continue
        due = int(s["due_installments"])
        vals.append(30 * due if measure == "Days" else due)
    return max(vals) if vals else None


def window_aggregate(monthly_values: dict, spec: WindowSpec, as_of: int):
    """Statistic over the ``spec.window`` months strictly before ``as_of``.

    ``monthly_values`` maps YYYYMM -> value or None.  ``agr`` ignores missing
    months; ``ags`` counts them as zero.  Both return None when no month in
    the window has a value.
    """
    months = [from_index(-i, as_of) for i in range(spec.window, 0, -1)]
    present = [monthly_values.get(m) for m in months]
    known = [v for v in present if v is not None]
    if not known:
        return None
    vals = known if spec.missing_mode == "agr" else [0 if v is None else v for v in present]
    if spec.statistic == "Max":
        return max(vals)
    if spec.statistic == "Min":
        return min(vals)
    return sum(vals) / len(vals)


class HistoryStore:
    """Customer x month panels of visible account history.

    ``origin`` is the YYYYMM of month index 0 and ``n_months`` the panel
    length.  Customers are indexed by their integer id (``aid``).
    """

    def __init__(self, n_customers: int, n_months: int, origin: int):
        self.n_customers = int(n_customers)
        self.n_months = int(n_months)
        self.origin = int(origin)
        shape = (self.n_customers, self.n_months)
        self.maxdue = {p: np.full(shape, -1, dtype=np.int8) for p in PRODUCTS}
        self.arrears = np.zeros(shape, dtype=np.int16)
        self.good = np.zeros(shape, dtype=np.int16)
        self.opened = {p: np.zeros(shape, dtype=np.int16) for p in PRODUCTS}
        self.closed_b = {p: np.zeros(shape, dtype=np.int16) for p in PRODUCTS}
        self.closed_c = {p: np.zeros(shape, dtype=np.int16) for p in PRODUCTS}
        self._buckets: list[list[np.ndarray]] = [[] for _ in range(self.n_months)]
        self.visible = set()

    # snapshot rows are stored as an int64 matrix with these columns
    _ROW = ("aid", "t", "prod", "due", "status", "paid", "left", "n_inst", "inst_cents")

    def add(self, accounts: pd.DataFrame, snapshots: pd.DataFrame) -> None:
        """Insert accounts (production rows with ``product``) and all their snapshots."""
        if len(accounts) == 0:
            return
        self.visible.update(accounts["cid"].tolist())
        a_aid = accounts["aid"].to_numpy(np.int64)
        a_t = to_index(accounts["period"].to_numpy(np.int64), self.origin)
        a_prod = np.where(accounts["product"].to_numpy() == "Css", 0, 1)
        for j, p in enumerate(PRODUCTS):
            m = a_prod == j
            np.add.at(self.opened[p], (a_aid[m], a_t[m]), 1)
        if len(snapshots) == 0:
            return
        info = accounts.set_index("cid")
        cid = snapshots["cid"].to_numpy(np.int64)
        aid = snapshots["aid"].to_numpy(np.int64)
        t = to_index(snapshots["period"].to_numpy(np.int64), self.origin)
        due = snapshots["due_installments"].to_numpy(np.int64)
        status = snapshots["status"].map(_STATUS_CODE).to_numpy(np.int64)
        prod = np.where(info.loc[cid, "product"].to_numpy() == "Css", 0, 1)
        n_inst = info.loc[cid, "app_n_installments"].to_numpy(np.int64)
        cents = np.rint(info.loc[cid, "app_installment"].to_numpy(float) * 100).astype(np.int64)
        for j, p in enumerate(PRODUCTS):
            m = prod == j
            np.maximum.at(self.maxdue[p], (aid[m], t[m]), due[m].astype(np.int8))
            mb = m & (status == 1)
            np.add.at(self.closed_b[p], (aid[mb], t[mb]), 1)
            mc = m & (status == 2)
            np.add.at(self.closed_c[p], (aid[mc], t[mc]), 1)
        np.add.at(self.arrears, (aid, t), (due > 0).astype(np.int16))
        np.add.at(self.good, (aid, t), (due == 0).astype(np.int16))
        live = status == 0
        rows = np.column_stack([
            aid, t, prod, due, status,
            snapshots["paid_installments"].to_numpy(np.int64),
            snapshots["left_installments"].to_numpy(np.int64), n_inst, cents,
        ])[live]
        order = np.argsort(rows[:, 1], kind="stable")
        rows = rows[order]
        bounds = np.searchsorted(rows[:, 1], np.arange(self.n_months + 1))
        for m in np.flatnonzero(np.diff(bounds)):
            self._buckets[m].append(rows[bounds[m]:bounds[m + 1]])

    def active_rows(self, t: int) -> np.ndarray:
        """Visible status-A snapshot rows of month ``t``."""
        if t < 0 or not self._buckets[t]:
            return np.empty((0, len(self._ROW)), dtype=np.int64)
        if len(self._buckets[t]) > 1:
            self._buckets[t] = [np.concatenate(self._buckets[t])]
        return self._buckets[t][0]

    # ---------------------------------------------------------------- queries

    def build(self, apps: pd.DataFrame) -> pd.DataFrame:
        """ABT rows for ``apps`` (production rows with ``product``), input order."""
        if len(apps) == 0:
            return pd.DataFrame(columns=ABT_COLUMNS)
        t_all = to_index(apps["period"].to_numpy(np.int64), self.origin)
        parts = []
        for t0 in np.unique(t_all):
            sel = np.flatnonzero(t_all == t0)
            parts.append((sel, self._build_month(apps.iloc[sel], int(t0))))
        order = np.concatenate([s for s, _ in parts])
        out = pd.concat([df for _, df in parts], ignore_index=True)
        inv = np.empty_like(order)
        inv[order] = np.arange(len(order))
        return out.iloc[inv].reset_index(drop=True)[ABT_COLUMNS]

    def _build_month(self, apps: pd.DataFrame, t0: int) -> pd.DataFrame:
        n = len(apps)
        c = apps["aid"].to_numpy(np.int64)
        is_css = apps["product"].to_numpy() == "Css"
        income = apps["app_income"].to_numpy(float)
        spend = apps["app_spendings"].to_numpy(float)
        inst = apps["app_installment"].to_numpy(float)
        amount = apps["app_loan_amount"].to_numpy(float)
        out = {
            "cid": apps["cid"].to_numpy(np.int64),
            "aid": c,
            "period": apps["period"].to_numpy(np.int64),
            "act_age": apps["age"].to_numpy(float),
            "act_cc": (inst + spend) / income,
            "act_loaninc": amount / income,
        }
        for f in APP_FIELDS:
            out[f] = apps[f].to_numpy()

        # loan history before t0
        hist = {}
        for p in PRODUCTS:
            op = self.opened[p][c, :t0]
            cnt = op.sum(axis=1).astype(np.int64)
            has = cnt > 0
            if t0 > 0:
                first = np.argmax(op > 0, axis=1)
                last = t0 - 1 - np.argmax(op[:, ::-1] > 0, axis=1)
            else:
                first = last = np.zeros(n, dtype=np.int64)
            hist[p] = dict(
                n=cnt,
                first=np.where(has, t0 - first, np.nan),
                last=np.where(has, t0 - last, np.nan),
                nb=np.where(has, self.closed_b[p][c, :t0].sum(axis=1), np.nan),
                nc=np.where(has, self.closed_c[p][c, :t0].sum(axis=1), np.nan),
            )
        n_css, n_ins = hist["C"]["n"], hist["I"]["n"]
        out["act_call_n_loan"] = n_css + n_ins + 1
        out["act_ccss_n_loan"] = n_css + is_css
        out["act_cins_n_loan"] = n_ins + ~is_css
        for p, tag in (("C", "ccss"), ("I", "cins")):
            out[f"act_{tag}_n_statB"] = hist[p]["nb"]
            out[f"act_{tag}_n_statC"] = hist[p]["nc"]
            out[f"act_{tag}_n_loans_hist"] = hist[p]["n"]
            out[f"act_{tag}_min_seniority"] = hist[p]["last"]
            out[f"act_{tag}_seniority"] = hist[p]["first"]

        # state of visible status-A accounts in the previous month
        rows = self.active_rows(t0 - 1)
        agg = {p: _active_aggregates(rows[rows[:, 2] == j], c) for j, p in enumerate(PRODUCTS)}
        for p, tag in (("C", "ccss"), ("I", "cins")):
            g = agg[p]
            has = g["n"] > 0
            out[f"act_{tag}_maxdue"] = np.where(has, g["maxdue"], np.nan)
            out[f"act_{tag}_n_loans_act"] = g["n"]
            out[f"act_{tag}_utl"] = np.where(has, g["left"] / np.maximum(g["ninst"], 1), np.nan)
            out[f"act_{tag}_cc"] = (g["cents"] / 100.0 + spend) / income
            out[f"act_{tag}_dueutl"] = np.where(has, g["due"] / np.maximum(g["ninst"], 1), np.nan)
            out[f"act_{tag}_min_lninst"] = np.where(has, g["minleft"], np.nan)
            out[f"act_{tag}_min_pninst"] = np.where(has, g["minpaid"], np.nan)
        app_cents = np.rint(inst * 100).astype(np.int64)
        out["act_call_cc"] = ((agg["C"]["cents"] + agg["I"]["cents"] + app_cents) / 100.0 + spend) / income
        out["act_cus_active"] = ((agg["C"]["n"] + agg["I"]["n"]) > 0).astype(np.int64)

        # windowed panels: months t0-12 .. t0-1
        idx = t0 - 12 + np.arange(12)
        valid = idx >= 0
        cols = np.clip(idx, 0, None)
        due_w = {}
        for p in PRODUCTS:
            v = self.maxdue[p][c[:, None], cols[None, :]].astype(np.int64)
            due_w[p] = np.where(valid[None, :], v, -1)
        due_w["A"] = np.maximum(due_w["C"], due_w["I"])
        arr_w = np.where(valid[None, :], self.arrears[c[:, None], cols[None, :]], 0).astype(np.int64)
        good_w = np.where(valid[None, :], self.good[c[:, None], cols[None, :]], 0).astype(np.int64)
        for k in WINDOWS:
            seen = (due_w["A"][:, 12 - k:] >= 0).any(axis=1)
            out[f"act{k}_n_arrears"] = np.where(seen, (arr_w[:, 12 - k:] > 0).sum(axis=1), np.nan)
            out[f"act{k}_n_arrears_days"] = np.where(seen, arr_w[:, 12 - k:].sum(axis=1), np.nan)
            out[f"act{k}_n_good_days"] = np.where(seen, good_w[:, 12 - k:].sum(axis=1), np.nan)
        for spec in WINDOW_SPECS:
            v = due_w[spec.product][:, 12 - spec.window:]
            if spec.measure == "Days":
                v = np.where(v >= 0, 30 * v, -1)
            out[spec.name] = _window_stat(v, spec.statistic, spec.missing_mode)
        return pd.DataFrame(out)


def _active_aggregates(rows: np.ndarray, c: np.ndarray) -> dict:
    """Per-application aggregates of the customer's active rows (aligned to ``c``)."""
    n = len(c)
    res = {k: np.zeros(n, dtype=np.int64)
           for k in ("n", "maxdue", "left", "ninst", "due", "cents", "minleft", "minpaid")}
    if len(rows) == 0:
        return res
    rows = rows[np.isin(rows[:, 0], c)]
    if len(rows) == 0:
        return res
    uniq, inv = np.unique(rows[:, 0], return_inverse=True)
    m = len(uniq)
    big = np.iinfo(np.int64).max
    g = dict(
        n=np.bincount(inv, minlength=m).astype(np.int64),
        maxdue=_gmax(rows[:, 3], inv, m, 0),
        left=_gsum(rows[:, 6], inv, m),
        ninst=_gsum(rows[:, 7], inv, m),
        due=_gsum(rows[:, 3], inv, m),
        cents=_gsum(rows[:, 8], inv, m),
        minleft=-_gmax(-rows[:, 6], inv, m, -big),
        minpaid=-_gmax(-rows[:, 5], inv, m, -big),
    )
    j = np.minimum(np.searchsorted(uniq, c), m - 1)
    hit = uniq[j] == c
    for k in res:
        res[k][hit] = g[k][j[hit]]
    return res


def _gmax(values, inv, m, fill):
    out = np.full(m, fill, dtype=np.int64)
    np.maximum.at(out, inv, values)
    return out


def _gsum(values, inv, m):
    out = np.zeros(m, dtype=np.int64)
    np.add.at(out, inv, values)
    return out


def _window_stat(v: np.ndarray, stat: str, mode: str) -> np.ndarray:
    present = v >= 0
    cnt = present.sum(axis=1)
    if mode == "ags":
        z = np.where(present, v, 0)
        if stat == "Max":
            r = z.max(axis=1).astype(float)
        elif stat == "Min":
            r = z.min(axis=1).astype(float)
        else:
            r = z.sum(axis=1) / v.shape[1]
    else:
        if stat == "Max":
            r = np.where(present, v, -1).max(axis=1).astype(float)
        elif stat == "Min":
            r = np.where(present, v, np.iinfo(np.int64).max).min(axis=1).astype(float)
        else:
            r = np.where(present, v, 0).sum(axis=1) / np.maximum(cnt, 1)
    return np.where(cnt > 0, r, np.nan)


def world_frame(world) -> tuple[int, int, int]:
    """(n_customers, n_months, origin) of the panels needed for ``world``."""
    cfg = world.config
    prod = world.production
    if cfg is not None:
        origin, n_months, n_cust = cfg.start_period, cfg.n_months, cfg.n_customers
    else:
        tx = world.transactions
        periods = np.concatenate([prod["period"].to_numpy(), tx["period"].to_numpy()])
        origin = int(periods.min()) if len(periods) else 197501
        n_months = int(to_index(int(periods.max()), origin)) + 1 if len(periods) else 1
        n_cust = 0
    n_cust = max(n_cust, int(prod["aid"].max()) + 1 if len(prod) else 0)
    return n_cust, n_months, origin


def history_store(world, visible_cids=None) -> HistoryStore:
    """Store holding the whole universe, or only the accounts in ``visible_cids``."""
    store = HistoryStore(*world_frame(world))
    prod = world.production
    tx = world.transactions
    if visible_cids is not None:
        keep = np.isin(prod["cid"].to_numpy(), np.asarray(list(visible_cids), dtype=np.int64))
        prod = prod[keep]
        tx = tx[tx["cid"].isin(prod["cid"])]
    store.add(prod, tx)
    return store


def build_abt(world, applications: pd.DataFrame | None = None, visible_cids=None,
              with_targets: bool = True) -> pd.DataFrame:
    """ABT for ``applications`` (default: every application in the world)."""
    apps = world.production if applications is None else applications
    out = history_store(world, visible_cids).build(apps)
    if with_targets:
        for col in TARGET_COLUMNS:
            out[col] = apps[col].to_numpy()
    return out


def build_abt_row(application, visible_history: pd.DataFrame, as_of: int | None = None,
                  visible_accounts: pd.DataFrame | None = None, frame=None) -> pd.Series:
    """ABT record for one application from an explicit visible history.

    ``application`` is a production row (Series or dict, with ``product``);
    ``visible_history`` holds the snapshot rows the bank may see and
    ``visible_accounts`` the matching production rows.  Only months strictly
    before ``as_of`` (default: the application period) are used.
    """
    app = pd.DataFrame([dict(application)])
    if as_of is not None:
        app["period"] = int(as_of)
    accts = visible_accounts if visible_accounts is not None else app.iloc[:0]
    if len(visible_history):
        owners = set(visible_history["aid"].unique())
        if owners - {int(app["aid"].iloc[0])}:
            raise ValueError("visible history belongs to another customer")
    if frame is None:
        periods = [int(app["period"].iloc[0])]
        if len(visible_history):
            periods += visible_history["period"].tolist()
        if len(accts):
            periods += accts["period"].tolist()
        origin = from_index(-12, min(periods))
        frame = (int(app["aid"].iloc[0]) + 1, to_index(max(periods), origin) + 1, origin)
    store = HistoryStore(*frame)
    store.add(accts, visible_history)
    return store.build(app).iloc[0]

"""Vectorised two-product world generator.

All active accounts are advanced together month by month.  Every random
draw is keyed by (seed, purpose, customer, loan sequence, month), so a
customer's path does not depend on the processing order of anyone else.
The only cross-customer coupling is the monthly cash-response intercept,
which is solved deterministically so the mean propensity hits the target.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import optimize, stats
from scipy.special import expit

from creditlab.periods import from_index, to_index
from creditlab.simkernel import rng as _rng
from creditlab.simkernel.accounts import (
    CSS,
    INS,
    STATUS_LABELS,
    advance_state,
    annuity_installment,
    behavior_score,
    bracket_of,
    static_score,
)
from creditlab.simkernel.config import ConfigError, GenConfig
from creditlab.simkernel.matrix import cumulative, sample_next, shift_matrices

CATEGORICALS = ("branch", "gender", "job_code", "marital_status", "city", "home_status", "cars")

PRODUCTION_COLUMNS = [
    "cid", "aid", "period", "app_loan_amount", "app_n_installments", "app_installment",
    "app_income", "app_spendings", "app_number_of_children",
    "app_char_branch", "app_char_gender", "app_char_job_code", "app_char_marital_status",
    "app_char_city", "app_char_home_status", "app_char_cars", "age", "loan_seq",
    "true_risk_index", "default_3", "default_6", "default_9", "default_12",
]
TRANSACTION_COLUMNS = [
    "cid", "aid", "period", "due_installments", "days_past_due",
    "paid_installments", "left_installments", "status",
]
HORIZONS = (3, 6, 9, 12)


@dataclass
class WorldDatasets:
    """Ground-truth universe: production (application) and transaction tables."""

    ins_production: pd.DataFrame
    css_production: pd.DataFrame
    ins_transactions: pd.DataFrame
    css_transactions: pd.DataFrame
    config: GenConfig | None = None
    customers: pd.DataFrame | None = None
    meta: dict = field(default_factory=dict)

    @property
    def production(self) -> pd.DataFrame:
        """Both products stacked, with a ``product`` column, ordered by cid."""
        parts = _nonempty(self.ins_production.assign(product=INS), self.css_production.assign(product=CSS))
        return pd.concat(parts, ignore_index=True).sort_values("cid", kind="stable").reset_index(drop=True)

    @property
    def transactions(self) -> pd.DataFrame:
        parts = _nonempty(self.ins_transactions.assign(product=INS), self.css_transactions.assign(product=CSS))
        return (pd.concat(parts, ignore_index=True)
                .sort_values(["cid", "period"], kind="stable").reset_index(drop=True))

    def global_risk(self, horizon: int = 12) -> float:
        col = f"default_{horizon}"
        n = len(self.ins_production) + len(self.css_production)
        if n == 0:
            return float("nan")
        return float((self.ins_production[col].sum() + self.css_production[col].sum()) / n)


def _nonempty(*frames):
    keep = [f for f in frames if len(f)]
    return keep or list(frames[:1])


# ---------------------------------------------------------------- matrices

def effective_matrix(base, bracket: int, period: int, cfg: GenConfig) -> np.ndarray:
    """Transition matrix for one behaviour-score bracket in one month."""
    if not (0 <= int(bracket) < cfg.n_brackets):
        raise ConfigError(f"bracket {bracket} outside 0..{cfg.n_brackets - 1}")
    t = to_index(period, cfg.start_period)
    if not (0 <= t < cfg.n_months):
        raise ConfigError(f"period {period} outside the configured range")
    shift = cfg.bracket_shifts[int(bracket)] + float(cfg.macro.log_multiplier(period)) + cfg.risk_shift
    return shift_matrices(base, [shift])[0]


_CUM_CACHE: dict = {}


def effective_cumulative(cfg: GenConfig) -> np.ndarray:
    """Cumulative effective matrices for every (month, bracket), row ``t*K + b``."""
    key = (cfg.base_matrix, cfg.bracket_shifts, cfg.macro, cfg.risk_shift,
           cfg.start_period, cfg.end_period)
    hit = _CUM_CACHE.get(key)
    if hit is not None:
        return hit
    periods = from_index(np.arange(cfg.n_months), cfg.start_period)
    macro = np.asarray(cfg.macro.log_multiplier(periods), dtype=float)
    shifts = (macro[:, None] + np.asarray(cfg.bracket_shifts)[None, :] + cfg.risk_shift).ravel()
    cum = cumulative(shift_matrices(cfg.base_matrix, shifts))
    if len(_CUM_CACHE) > 64:
        _CUM_CACHE.clear()
    _CUM_CACHE[key] = cum
    return cum


# ---------------------------------------------------------------- customers

def _categorical(u, probs: dict) -> np.ndarray:
    cum = np.cumsum(list(probs.values()))
    return np.minimum(np.searchsorted(cum, u, side="right"), len(probs) - 1)


def draw_customers(cfg: GenConfig) -> pd.DataFrame:
    """Customer profiles with entry month, demographics and latent traits."""
    d = cfg.demographics
    p = cfg.propensity
    s = cfg.seed
    c = np.arange(cfg.n_customers, dtype=np.int64)
    tag = _rng.DEMOGRAPHIC

    def u(k):
        return _rng.keyed_uniform(s, tag, c, k)

    def z(k):
        return _rng.keyed_normal(s, tag, c, k)

    entry = np.floor(u(0) * (cfg.last_application_index + 1)).astype(np.int64)
    age = np.clip(d.age_mean + d.age_sd * z(1), d.age_min, d.age_max).round(1)
    income = np.maximum(np.round(d.income_median * np.exp(d.income_sigma * z(2))), 100.0)
    share = stats.beta.ppf(u(3), *d.spendings_share)
    spendings = np.round(income * share)
    children = stats.poisson.ppf(u(4), d.children_mean).astype(np.int64)
    out = {
        "customer_id": c,
        "entry_index": entry,
        "entry_period": from_index(entry, cfg.start_period),
        "age": age,
        "income": income,
        "spendings": spendings,
        "number_of_children": children,
    }
    for j, name in enumerate(CATEGORICALS):
        probs = getattr(d, name)
        idx = _categorical(u(10 + j), probs)
        out[name + "_idx"] = idx
        out[name] = np.array(list(probs))[idx]
    latent = z(20)
    rho = p.risk_correlation
    out["latent_risk"] = latent
    out["cash_appetite"] = (p.appetite * (rho * latent + np.sqrt(1.0 - rho * rho) * z(21))
                            + p.age_per_year * (age - 40.0)
                            + p.log_income * np.log(income / d.income_median))
    return pd.DataFrame(out)


# ---------------------------------------------------------------- cash response

def response_intercept(index: np.ndarray, target: float) -> float:
    """Intercept k with mean(expit(index + k)) == target."""
    if len(index) == 0 or target <= 0.0:
        return -np.inf
    f = lambda k: float(np.mean(expit(index + k))) - target  # noqa: E731
    lo, hi = -60.0, 60.0
    return optimize.brentq(f, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=200)


def spawn_cash_applications(eligible_customers, propensity_index, period: int,
                            cfg: GenConfig) -> np.ndarray:
    """Customers (sorted ids) applying for a cash loan in ``period``.

    ``eligible_customers`` are those holding a status-A account in the
    previous month; ``propensity_index`` is their individual response index.
    The monthly intercept is set so that the mean response probability over
    the eligible population equals ``cfg.response_rate_target``.
    """
    t = to_index(period, cfg.start_period)
    if t <= 0:
        raise ConfigError("cash applications need a previous month")
    ids = np.asarray(eligible_customers, dtype=np.int64)
    idx = np.asarray(propensity_index, dtype=float)
    if len(ids) == 0 or cfg.response_rate_target <= 0.0:
        return np.empty(0, dtype=np.int64)
    k = response_intercept(idx, cfg.response_rate_target)
    prob = expit(idx + k)
    draw = _rng.keyed_uniform(cfg.seed, _rng.CSS_APPLY, ids, t)
    return np.sort(ids[draw < prob])


# ---------------------------------------------------------------- generation

class _Book:
    """Column store of open accounts."""

    cols = ("id", "cust", "prod", "open_t", "seq", "paid", "due", "left", "base")

    def __init__(self):
        for c in self.cols:
            setattr(self, c, np.empty(0, dtype=np.float64 if c == "base" else np.int64))

    def append(self, **arrays):
        for c in self.cols:
            setattr(self, c, np.concatenate([getattr(self, c), arrays[c]]))

    def keep(self, mask):
        for c in self.cols:
            setattr(self, c, getattr(self, c)[mask])


def _group_max(values, groups, n, fill):
    out = np.full(n, fill, dtype=values.dtype if len(values) else np.int64)
    np.maximum.at(out, groups, values)
    return out


def generate_world(cfg: GenConfig) -> WorldDatasets:
    """Generate the full universe under full financing."""
    C, T, K = cfg.n_customers, cfg.n_months, cfg.n_brackets
    seed = cfg.seed
    last_app = cfg.last_application_index
    cum = effective_cumulative(cfg)
    cust = draw_customers(cfg)
    entry = cust["entry_index"].to_numpy()
    age0 = cust["age"].to_numpy()
    income = cust["income"].to_numpy()
    spend = cust["spendings"].to_numpy()
    children = cust["number_of_children"].to_numpy()
    job = cust["job_code_idx"].to_numpy()
    marital = cust["marital_status_idx"].to_numpy()
    latent = cust["latent_risk"].to_numpy()
    appetite = cust["cash_appetite"].to_numpy()
    pw = cfg.propensity
    bw = cfg.behavior

    n_loans = np.zeros(C, dtype=np.int64)
    n_css = np.zeros(C, dtype=np.int64)
    nbad_ins = np.zeros(C, dtype=np.int64)
    nbad_all = np.zeros(C, dtype=np.int64)
    active_prev = np.zeros(C, dtype=bool)
    css_active_prev = np.zeros(C, dtype=np.int64)
    maxdue_prev = np.zeros(C, dtype=np.int64)

    term_cum = np.cumsum(cfg.ins_term_probs)
    terms = np.asarray(cfg.ins_terms, dtype=np.int64)
    lo_amt, hi_amt = cfg.ins_amount_bounds

    book = _Book()
    next_id = 0
    apps = []  # per-month dicts of new-account columns
    tx = []
    for t in range(T):
        new = []
        if t <= last_app:
            # instalment applications: entry month plus a monthly repeat hazard
            rep = _rng.keyed_uniform(seed, _rng.INS_APPLY, np.arange(C), t) < cfg.repeat_ins_rate
            ins_c = np.flatnonzero((entry == t) | ((entry < t) & rep))
            if len(ins_c):
                seq = n_loans[ins_c].copy()
                n_loans[ins_c] += 1
                amt = np.exp(np.log(cfg.ins_amount_median)
                             + cfg.ins_amount_sigma * _rng.keyed_normal(seed, _rng.AMOUNT, ins_c, seq))
                amt = np.clip(np.round(amt), lo_amt, hi_amt)
                ut = _rng.keyed_uniform(seed, _rng.TERM, ins_c, seq)
                n_inst = terms[np.minimum(np.searchsorted(term_cum, ut, side="right"), len(terms) - 1)]
                new.append((0, ins_c, seq, amt, n_inst, cfg.ins_apr))
            if t > 0:
                elig = np.flatnonzero(active_prev)
                index = (appetite[elig]
                         + pw.log_css_loans * np.log1p(n_css[elig])
                         + pw.css_active * css_active_prev[elig]
                         + pw.delinquent * (maxdue_prev[elig] > 0))
                css_c = spawn_cash_applications(elig, index, from_index(t, cfg.start_period), cfg)
                if len(css_c):
                    seq = n_loans[css_c].copy()
                    n_loans[css_c] += 1
                    n_css[css_c] += 1
                    amt = np.full(len(css_c), float(cfg.cash_amount))
                    n_inst = np.full(len(css_c), cfg.cash_term, dtype=np.int64)
                    new.append((1, css_c, seq, amt, n_inst, cfg.css_apr))
        for prod, cc, seq, amt, n_inst, apr in new:
            inst = np.round(annuity_installment(amt, n_inst, apr), 2)
            age = np.round(age0[cc] + (t - entry[cc]) / 12.0, 2)
            base = static_score(cfg, np.full(len(cc), prod), latent[cc], job[cc], marital[cc],
                                children[cc], age, income[cc], spend[cc], amt, inst)
            ids = np.arange(next_id, next_id + len(cc), dtype=np.int64)
            next_id += len(cc)
            apps.append(dict(cid=ids, aid=cc, t=np.full(len(cc), t), prod=np.full(len(cc), prod),
                             amount=amt, n_inst=n_inst, inst=inst, age=age, seq=seq, base=base))
            book.append(id=ids, cust=cc, prod=np.full(len(cc), prod), open_t=np.full(len(cc), t),
                        seq=seq, paid=np.zeros(len(cc), dtype=np.int64),
                        due=np.zeros(len(cc), dtype=np.int64), left=n_inst.astype(np.int64),
                        base=base)
        if len(book.id) == 0:
            active_prev[:] = False
            css_active_prev[:] = 0
            maxdue_prev[:] = 0
            continue

        # customer-level inputs from last month, per product class
        is_ins = book.prod == 0
        ci = book.cust[is_ins]
        cnt_ins = np.bincount(ci, minlength=C)
        cnt_all = np.bincount(book.cust, minlength=C)
        max_ins = _group_max(book.due[is_ins], ci, C, 0)
        max_all = _group_max(book.due, book.cust, C, 0)
        last_ins = _group_max(book.id[is_ins], ci, C, -1)
        last_all = _group_max(book.id, book.cust, C, -1)
        c = book.cust
        n_other = np.where(is_ins, cnt_ins[c], cnt_all[c]) - 1
        cust_max = np.where(is_ins, max_ins[c], max_all[c])
        is_last = book.id == np.where(is_ins, last_ins[c], last_all[c])
        n_bad = np.where(is_ins, nbad_ins[c], nbad_all[c])
        score = behavior_score(book.base, book.due, cust_max, n_other, is_last,
                               t - book.open_t, n_bad, bw)
        b = bracket_of(cfg, score)
        u = _rng.keyed_uniform(seed, _rng.STEP, c, book.seq, t)
        drawn = sample_next(cum, t * K + b, book.due, u)
        paid, due, left, status = advance_state(book.paid, book.due, book.left, drawn)
        tx.append((book.id, c, np.full(len(c), t), due, paid, left, status))

        bad = status == 1
        nbad_all += np.bincount(c[bad], minlength=C)
        nbad_ins += np.bincount(c[bad & is_ins], minlength=C)
        live = status == 0
        active_prev[:] = False
        active_prev[c[live]] = True
        css_active_prev = np.bincount(c[live & ~is_ins], minlength=C)
        maxdue_prev = _group_max(due[live], c[live], C, 0)
        book.paid, book.due, book.left = paid, due, left
        book.keep(live)

    return _assemble(cfg, cust, apps, tx)


def _assemble(cfg, cust, apps, tx) -> WorldDatasets:
    def cat(key, source, dtype=None):
        arrs = [a[key] for a in source]
        if not arrs:
            return np.empty(0, dtype=dtype or np.int64)
        return np.concatenate(arrs)

    prod = cat("prod", apps)
    cid = cat("cid", apps)
    aid = cat("aid", apps)
    t_open = cat("t", apps)
    n_acc = len(cid)

    if tx:
        cols = [np.concatenate([m[i] for m in tx]) for i in range(7)]
    else:
        cols = [np.empty(0, dtype=np.int64) for _ in range(7)]
    t_id, t_cust, t_t, t_due, t_paid, t_left, t_status = cols
    order = np.lexsort((t_t, t_id))
    t_id, t_cust, t_t, t_due, t_paid, t_left, t_status = (
        x[order] for x in (t_id, t_cust, t_t, t_due, t_paid, t_left, t_status))

    # horizon targets straight from the transactions
    targets = {}
    mob = t_t - t_open[t_id] if n_acc else t_t
    for k in HORIZONS:
        thr = 2 if k == 3 else 3
        hit = (mob < k) & (t_due >= thr)
        flag = np.zeros(n_acc, dtype=np.int64)
        np.maximum.at(flag, t_id[hit], 1)
        targets[k] = flag

    cust_idx = aid
    production = pd.DataFrame({
        "cid": cid,
        "aid": aid,
        "period": from_index(t_open, cfg.start_period) if n_acc else np.empty(0, dtype=np.int64),
        "app_loan_amount": cat("amount", apps, float),
        "app_n_installments": cat("n_inst", apps),
        "app_installment": cat("inst", apps, float),
        "app_income": cust["income"].to_numpy()[cust_idx],
        "app_spendings": cust["spendings"].to_numpy()[cust_idx],
        "app_number_of_children": cust["number_of_children"].to_numpy()[cust_idx],
        **{f"app_char_{n}": cust[n].to_numpy()[cust_idx] for n in CATEGORICALS},
        "age": cat("age", apps, float),
        "loan_seq": cat("seq", apps),
        "true_risk_index": -cat("base", apps, float),
        **{f"default_{k}": targets[k] for k in HORIZONS},
    })[PRODUCTION_COLUMNS]

    trans = pd.DataFrame({
        "cid": t_id,
        "aid": t_cust,
        "period": from_index(t_t, cfg.start_period) if len(t_t) else t_t,
        "due_installments": t_due,
        "days_past_due": 30 * t_due,
        "paid_installments": t_paid,
        "left_installments": t_left,
        "status": STATUS_LABELS[t_status] if len(t_status) else np.empty(0, dtype=object),
    })
    t_prod = prod[t_id] if n_acc else t_id
    is_css = prod == 1
    world = WorldDatasets(
        ins_production=production[~is_css].reset_index(drop=True),
        css_production=production[is_css].reset_index(drop=True),
        ins_transactions=trans[t_prod == 0].reset_index(drop=True),
        css_transactions=trans[t_prod == 1].reset_index(drop=True),
        config=cfg,
        customers=cust,
    )
    world.meta["global_default_12"] = world.global_risk(12)
    return world

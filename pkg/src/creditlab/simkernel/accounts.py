"""Account-level types, the monthly stepper and the single-account simulator.

The vectorised generator and :func:`simulate_account` share the array
helpers defined here, so a single account re-simulated in isolation follows
exactly the same path it took inside the world.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from creditlab.periods import add_months, to_index
from creditlab.simkernel import rng as _rng
from creditlab.simkernel.matrix import BAD_STATE, cumulative, sample_next

INS, CSS = "Ins", "Css"
PRODUCT_CODES = {INS: 0, CSS: 1}


class ContractViolation(ValueError):
    """Raised when an operation is called outside its precondition."""


@dataclass(frozen=True)
class CustomerProfile:
    customer_id: int
    entry_period: int
    age: float  # at entry
    income: float
    spendings: float
    number_of_children: int
    branch: str
    gender: str
    job_code: str
    marital_status: str
    city: str
    home_status: str
    cars: str
    latent_risk: float = 0.0
    cash_appetite: float = 0.0

    def __post_init__(self):
        if self.income <= 0:
            raise ContractViolation("income must be positive")
        if self.age < 18:
            raise ContractViolation("age must be at least 18")

    def age_at(self, period: int) -> float:
        return self.age + to_index(period, self.entry_period) / 12.0


@dataclass(frozen=True)
class LoanAccount:
    account_id: int
    customer_id: int
    product: str
    open_period: int
    amount: float
    n_installments: int
    installment: float
    loan_seq: int = 0

    def __post_init__(self):
        if self.product not in PRODUCT_CODES:
            raise ContractViolation(f"unknown product {self.product!r}")
        if self.amount <= 0 or self.n_installments <= 0 or self.installment <= 0:
            raise ContractViolation("amount, n_installments and installment must be positive")


@dataclass(frozen=True)
class MonthlySnapshot:
    account_id: int
    period: int
    due_installments: int
    paid_installments: int
    left_installments: int
    status: str

    @property
    def days_past_due(self) -> int:
        return 30 * self.due_installments


def annuity_installment(amount, n_installments, apr):
    """Level monthly payment of an amortising loan."""
    amount = np.asarray(amount, dtype=float)
    n = np.asarray(n_installments, dtype=float)
    r = apr / 12.0
    if r == 0:
        return amount / n
    g = (1.0 + r) ** n
    return amount * r * g / (g - 1.0)


def advance_state(paid, due, left, drawn):
    """Apply one month's drawn due count to (paid, due, left) arrays.

    A new instalment falls due while any remain.  The drawn state is capped
    at the number of instalments actually due, so a matured loan with
    arrears can only stay or cure.  Returns ``(paid, due, left, status)``
    with status codes 0 = A, 1 = B, 2 = C.
    """
    paid = np.asarray(paid)
    left = np.asarray(left)
    falls = left > 0
    left = left - falls
    due_now = np.asarray(due) + falls
    new_due = np.minimum(np.asarray(drawn), due_now)
    paid = paid + (due_now - new_due)
    status = np.where(new_due == BAD_STATE, 1, np.where((left == 0) & (new_due == 0), 2, 0))
    return paid, new_due, left, status


STATUS_LABELS = np.array(["A", "B", "C"])


def step_account(snap: MonthlySnapshot, m, rng_stream) -> MonthlySnapshot:
    """Advance an active account by one month under transition matrix ``m``.

    ``rng_stream`` is either a uniform draw in [0, 1) or a
    ``numpy.random.Generator``.
    """
    if snap.status != "A" or snap.due_installments >= BAD_STATE:
        raise ContractViolation("only status-A accounts can be stepped")
    if isinstance(rng_stream, np.random.Generator):
        u = rng_stream.random()
    else:
        u = float(rng_stream)
    cum = cumulative(np.asarray(m, dtype=float)[None])
    drawn = sample_next(cum, np.zeros(1, dtype=np.int64),
                        np.array([snap.due_installments]), np.array([u]))
    paid, due, left, status = advance_state(
        np.array([snap.paid_installments]), np.array([snap.due_installments]),
        np.array([snap.left_installments]), drawn)
    return MonthlySnapshot(
        account_id=snap.account_id,
        period=add_months(snap.period, 1),
        due_installments=int(due[0]),
        paid_installments=int(paid[0]),
        left_installments=int(left[0]),
        status=str(STATUS_LABELS[status[0]]),
    )


def opening_snapshot(acct: LoanAccount) -> MonthlySnapshot:
    """Virtual state one month before opening: nothing due yet."""
    return MonthlySnapshot(acct.account_id, add_months(acct.open_period, -1), 0, 0,
                           acct.n_installments, "A")


def behavior_score(base, own_due, cust_max_due, n_other, is_last, mob, n_bad, w):
    """Monthly behaviour score (higher is better) from last month's history.

    Evaluated element-wise on arrays; both simulation paths call it so the
    floating-point result is identical.
    """
    return (base
            - w.due * own_due
            - w.other_due * cust_max_due
            - w.other_loans * np.minimum(n_other, w.other_loans_cap)
            - w.last_loan * ((is_last != 0) & (n_other > 0))
            + w.seasoning * np.minimum(mob, w.seasoning_cap)
            - w.bad_history * np.minimum(n_bad, w.bad_history_cap))


def static_score(cfg, product_code, latent, job_idx, marital_idx, children, age,
                 income, spendings, amount, installment):
    """Origination part of the behaviour score, fixed for the account's life."""
    w = cfg.behavior
    d = cfg.demographics
    job_w = np.array([w.job_code[k] for k in d.job_code])
    mar_w = np.array([w.marital_status[k] for k in d.marital_status])
    ch_w = np.array(w.children)
    ch = np.minimum(np.asarray(children), len(ch_w) - 1)
    cc = (np.asarray(installment) + np.asarray(spendings)) / np.asarray(income)
    return (w.intercept
            - w.latent * latent
            + job_w[job_idx]
            + mar_w[marital_idx]
            + ch_w[ch]
            + w.age_per_year * (np.asarray(age) - 40.0)
            + w.log_income * np.log(np.asarray(income) / d.income_median)
            + w.log_amount * np.log(np.asarray(amount) / 5000.0)
            + w.credit_capacity * np.maximum(cc - 0.5, 0.0)
            - w.css_penalty * (np.asarray(product_code) == 1))


def bracket_of(cfg, score):
    """Bracket index: 0 is the worst (lowest-score) bracket."""
    return np.searchsorted(np.asarray(cfg.bracket_cuts), score, side="right")


def simulate_account(acct: LoanAccount, customer_history, cfg, rng_stream=None, *,
                     base_score: float, cum=None) -> list[MonthlySnapshot]:
    """Simulate one account from opening until closure or the end period.

    ``customer_history`` lists ``(LoanAccount, snapshots)`` pairs for the
    customer's other accounts (as generated); it supplies the monthly
    customer-level inputs of the behaviour score.  Ins accounts only look at
    Ins history, Css accounts at everything.  ``rng_stream`` is the master
    seed (defaults to ``cfg.seed``); ``cum`` optionally passes precomputed
    cumulative effective matrices.
    """
    from creditlab.simkernel.generator import effective_cumulative

    seed = cfg.seed if rng_stream is None else int(rng_stream)
    if cum is None:
        cum = effective_cumulative(cfg)
    k = cfg.n_brackets
    w = cfg.behavior
    t0 = to_index(acct.open_period, cfg.start_period)
    if not (0 <= t0 < cfg.n_months):
        raise ContractViolation("account opens outside the configured range")
    pcode = PRODUCT_CODES[acct.product]

    others = []
    for other, snaps in customer_history:
        if other.account_id == acct.account_id:
            continue
        if pcode == 0 and other.product != INS:
            continue
        by_t = {to_index(s.period, cfg.start_period): s for s in snaps}
        others.append((other, by_t))

    snap = opening_snapshot(acct)
    out = []
    for t in range(t0, cfg.n_months):
        own_due = snap.due_installments
        max_due = own_due
        n_out = 1
        last_id = acct.account_id
        n_bad = 0
        for other, by_t in others:
            cur = by_t.get(t)
            if cur is not None:
                n_out += 1
                last_id = max(last_id, other.account_id)
                prev = by_t.get(t - 1)
                if prev is not None:
                    max_due = max(max_due, prev.due_installments)
            n_bad += sum(1 for tt, s in by_t.items() if tt < t and s.status == "B")
        score = behavior_score(np.array([base_score]), np.array([own_due]),
                               np.array([max_due]), np.array([n_out - 1]),
                               np.array([last_id == acct.account_id]),
                               np.array([t - t0]), np.array([n_bad]), w)
        b = bracket_of(cfg, score)
        u = _rng.keyed_uniform(seed, _rng.STEP, acct.customer_id, acct.loan_seq, t)
        drawn = sample_next(cum, np.array([t * k]) + b, np.array([own_due]), np.atleast_1d(u))
        paid, due, left, status = advance_state(
            np.array([snap.paid_installments]), np.array([own_due]),
            np.array([snap.left_installments]), drawn)
        snap = MonthlySnapshot(acct.account_id, add_months(cfg.start_period, t), int(due[0]),
                               int(paid[0]), int(left[0]), str(STATUS_LABELS[status[0]]))
        out.append(snap)
        if snap.status != "A":
            break
    return out

"""Loan income and loss, portfolio profit, profit curves and the segment grid.

Per-loan income and loss are exact double-precision formulas; portfolio
totals are accumulated in integer cents so that the profit of a union of
disjoint portfolios is exactly the sum of their profits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd


class PricingError(ValueError):
    pass


@dataclass(frozen=True)
class PricingParams:
    """Loan pricing: APR, provision fraction ``p`` and loss given default."""

    apr: float
    provision: float = 0.0
    lgd: float = 0.5

    def __post_init__(self):
        if self.apr < 0:
            raise PricingError("apr must be non-negative")
        if not (0.0 <= self.provision < 1.0):
            raise PricingError("provision must lie in [0, 1)")
        if not (0.0 <= self.lgd <= 1.0):
            raise PricingError("lgd must lie in [0, 1]")

    @property
    def monthly_rate(self) -> float:
        return self.apr / 12.0


# pricing used for the Gini-to-profit study: 5000 over 36 months at 12%
TABLE_PRICING = PricingParams(apr=0.12, provision=0.06, lgd=0.5)
INS_PRICING = PricingParams(apr=0.01, provision=0.0, lgd=0.45)
CSS_PRICING = PricingParams(apr=0.18, provision=0.0, lgd=0.55)


@dataclass(frozen=True)
class LoanOutcome:
    amount: float
    n_installments: int
    defaulted: bool
    pricing: PricingParams

    def __post_init__(self):
        if self.amount <= 0 or self.n_installments <= 0:
            raise PricingError("amount and n_installments must be positive")


def _interest_factor(n, r: float):
    """N * r * (1+r)^N / ((1+r)^N - 1), equal to 1 in the zero-rate limit."""
    n = np.asarray(n, dtype=float)
    if r == 0:
        return np.ones_like(n)
    g = np.power(1.0 + r, n)
    return n * r * g / (g - 1.0)


def income(amount, n_installments, defaulted, pricing: PricingParams):
    """Income including provisions: ``A*p`` on default, interest plus provision otherwise."""
    a = np.asarray(amount, dtype=float)
    d = np.asarray(defaulted, dtype=bool)
    good = a * (_interest_factor(n_installments, pricing.monthly_rate) + (pricing.provision - 1.0))
    out = np.where(d, a * pricing.provision, good)
    return float(out) if out.ndim == 0 else out


def loss(amount, defaulted, pricing: PricingParams):
    """Observed loss: ``lgd * A`` with the loan amount as exposure, on default only."""
    a = np.asarray(amount, dtype=float)
    out = np.where(np.asarray(defaulted, dtype=bool), pricing.lgd * a, 0.0)
    return float(out) if out.ndim == 0 else out


def outcome_income(o: LoanOutcome) -> float:
    return income(o.amount, o.n_installments, o.defaulted, o.pricing)


def outcome_loss(o: LoanOutcome) -> float:
    return loss(o.amount, o.defaulted, o.pricing)


def expected_loss(pd_, lgd, ead):
    """EL = PD * LGD * EAD."""
    pd_ = np.asarray(pd_, dtype=float)
    lgd = np.asarray(lgd, dtype=float)
    if np.any((pd_ < 0) | (pd_ > 1)) or np.any((lgd < 0) | (lgd > 1)):
        raise PricingError("pd and lgd must lie in [0, 1]")
    if np.any(np.asarray(ead) < 0):
        raise PricingError("ead must be non-negative")
    out = pd_ * lgd * np.asarray(ead, dtype=float)
    return float(out) if out.ndim == 0 else out


def to_cents(values) -> np.ndarray:
    return np.rint(np.asarray(values, dtype=float) * 100.0).astype(np.int64)


@dataclass(frozen=True)
class PortfolioProfit:
    """Portfolio totals held in integer cents."""

    income_cents: int = 0
    loss_cents: int = 0
    n: int = 0

    @property
    def profit_cents(self) -> int:
        return self.income_cents - self.loss_cents

    @property
    def income(self) -> float:
        return self.income_cents / 100.0

    @property
    def loss(self) -> float:
        return self.loss_cents / 100.0

    @property
    def profit(self) -> float:
        return self.profit_cents / 100.0

    def __add__(self, other: "PortfolioProfit") -> "PortfolioProfit":
        return PortfolioProfit(self.income_cents + other.income_cents,
                               self.loss_cents + other.loss_cents, self.n + other.n)

    def as_tuple(self) -> tuple[float, float, float]:
        return self.income, self.loss, self.profit


def loan_cents(amount, n_installments, defaulted, pricing: PricingParams):
    """Per-loan (income, loss) in integer cents."""
    inc = to_cents(np.atleast_1d(income(amount, n_installments, defaulted, pricing)))
    los = to_cents(np.atleast_1d(loss(amount, defaulted, pricing)))
    return inc, los


def portfolio_profit(outcomes) -> PortfolioProfit:
    """Totals over an iterable of :class:`LoanOutcome`."""
    inc = los = n = 0
    for o in outcomes:
        i, l_ = loan_cents(o.amount, o.n_installments, o.defaulted, o.pricing)
        inc += int(i[0])
        los += int(l_[0])
        n += 1
    return PortfolioProfit(inc, los, n)


def portfolio_totals(amount, n_installments, defaulted, pricing: PricingParams) -> PortfolioProfit:
    """Vectorised :func:`portfolio_profit` for one pricing."""
    inc, los = loan_cents(amount, n_installments, defaulted, pricing)
    return PortfolioProfit(int(inc.sum()), int(los.sum()), len(inc))


@dataclass(frozen=True)
class ProfitCurve:
    """Samples from accept-none to accept-all.

    A sample with ``threshold`` accepts every loan whose risk value is
    ``<= threshold``; the first sample (threshold ``-inf``) accepts nothing.
    """

    threshold: np.ndarray
    n_accepted: np.ndarray
    acceptance_rate: np.ndarray
    income_cents: np.ndarray
    loss_cents: np.ndarray

    @property
    def profit_cents(self) -> np.ndarray:
        return self.income_cents - self.loss_cents

    @property
    def income(self) -> np.ndarray:
        return self.income_cents / 100.0

    @property
    def loss(self) -> np.ndarray:
        return self.loss_cents / 100.0

    @property
    def profit(self) -> np.ndarray:
        return self.profit_cents / 100.0

    def __len__(self) -> int:
        return len(self.threshold)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "threshold": self.threshold, "n_accepted": self.n_accepted,
            "acceptance_rate": self.acceptance_rate, "income": self.income,
            "loss": self.loss, "profit": self.profit,
        })


def profit_curve(risk, amount, n_installments, defaulted, pricing: PricingParams) -> ProfitCurve:
    """Profit of accepting every loan with risk at or below each distinct risk value.

    Loans tied on risk are accepted or rejected together.
    """
    risk = np.asarray(risk, dtype=float)
    n = len(risk)
    if n == 0:
        raise PricingError("profit curve needs at least one loan")
    if np.isnan(risk).any():
        raise PricingError("risk values must not be missing")
    inc, los = loan_cents(amount, n_installments, defaulted, pricing)
    order = np.argsort(risk, kind="stable")
    r = risk[order]
    ci = np.cumsum(inc[order])
    cl = np.cumsum(los[order])
    last = np.flatnonzero(np.r_[r[1:] != r[:-1], True])
    cnt = last + 1
    z = np.zeros(1, dtype=np.int64)
    return ProfitCurve(
        threshold=np.r_[-np.inf, r[last]],
        n_accepted=np.r_[0, cnt],
        acceptance_rate=np.r_[0, cnt] / n,
        income_cents=np.r_[z, ci[last]],
        loss_cents=np.r_[z, cl[last]],
    )


def best_cutoff(curve: ProfitCurve) -> tuple[float, float]:
    """(threshold, profit) of the most profitable sample; ties go to higher acceptance."""
    if len(curve) == 0:
        raise PricingError("empty curve")
    p = curve.profit_cents
    i = len(p) - 1 - int(np.argmax(p[::-1]))
    return float(curve.threshold[i]), float(p[i] / 100.0)


# ---------------------------------------------------------------- segment grid

def quantile_groups(values, n_groups: int) -> np.ndarray:
    """Equal-frequency group index in ``0..n_groups-1``; tied values share a group."""
    if n_groups < 2:
        raise PricingError("n_groups must be at least 2")
    v = np.asarray(values, dtype=float)
    if len(v) == 0:
        return np.empty(0, dtype=np.int64)
    edges = np.quantile(v, np.arange(1, n_groups) / n_groups, method="lower")
    return np.searchsorted(edges, v, side="left").astype(np.int64)


@dataclass(frozen=True)
class SegmentGrid:
    """PR-group x PD-group cells with counts, global profit and probability ranges."""

    cells: pd.DataFrame
    n_groups: int
    effective_pd_groups: int
    effective_pr_groups: int

    def profit_table(self) -> pd.DataFrame:
        return self.cells.pivot(index="pr_group", columns="pd_group", values="profit")

    def best_cell(self) -> tuple[int, int]:
        row = self.cells.loc[self.cells["profit"].idxmax()]
        return int(row["pr_group"]), int(row["pd_group"])


def segment_grid(pd_probs, pr_probs, ins_profit, future_cash_profit, n_groups: int = 5) -> SegmentGrid:
    """Global profit by (PR group, PD group).

    ``ins_profit`` is the profit of each instalment application and
    ``future_cash_profit`` the summed profit of its attributed future cash
    loans that pass the cash cut-off (both in currency units, aligned).
    """
    pd_probs = np.asarray(pd_probs, dtype=float)
    pr_probs = np.asarray(pr_probs, dtype=float)
    gi = quantile_groups(pd_probs, n_groups)
    gr = quantile_groups(pr_probs, n_groups)
    ins_c = to_cents(ins_profit)
    css_c = to_cents(future_cash_profit)
    frame = pd.DataFrame({"pr_group": gr, "pd_group": gi, "pd": pd_probs, "pr": pr_probs,
                          "ins_cents": ins_c, "css_cents": css_c})
    agg = frame.groupby(["pr_group", "pd_group"]).agg(
        count=("pd", "size"), ins_cents=("ins_cents", "sum"), css_cents=("css_cents", "sum"),
        min_pr=("pr", "min"), max_pr=("pr", "max"), min_pd=("pd", "min"), max_pd=("pd", "max"),
    ).reset_index()
    agg["share"] = agg["count"] / len(frame)
    agg["ins_profit"] = agg["ins_cents"] / 100.0
    agg["css_profit"] = agg["css_cents"] / 100.0
    agg["profit"] = (agg["ins_cents"] + agg["css_cents"]) / 100.0
    agg = agg.drop(columns=["ins_cents", "css_cents"])
    return SegmentGrid(agg, n_groups, len(np.unique(gi)), len(np.unique(gr)))

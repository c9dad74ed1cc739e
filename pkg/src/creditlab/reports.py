"""Report families: vintages, monthly stock, and the Gini to profit experiment."""

from __future__ import annotations

import numpy as np
import pandas as pd

from creditlab.finance import TABLE_PRICING, PricingParams, best_cutoff, profit_curve
from creditlab.periods import add_months
from creditlab.scorecard import gini

HORIZONS = (3, 6, 9, 12)


def vintage_report(production: pd.DataFrame, product: str | None = None) -> pd.DataFrame:
    """Default rates by origination month for every horizon.

    Args:
        production: application rows with ``period``, ``product`` and
            ``default_3`` .. ``default_12``.
        product: ``"Ins"``, ``"Css"`` or ``None`` for both.

    Returns:
        One row per month with at least one origination: ``period``,
        ``n_accounts`` and ``default_k`` rates.
    """
    rows = production if product is None else production[production["product"] == product]
    cols = [f"default_{k}" for k in HORIZONS]
    out = rows.groupby("period", sort=True)[cols].mean()
    out.insert(0, "n_accounts", rows.groupby("period", sort=True).size())
    return out.reset_index()


def stock_report(world) -> pd.DataFrame:
    """Active (status A) accounts per month and the cash response rate.

    The response rate of month t is the number of cash applications in t+1
    over all active accounts in t; it is missing for the last month.
    """
    tx = world.transactions
    active = tx[tx["status"] == "A"]
    prod = world.production
    ptype = prod.set_index("cid")["product"]
    kinds = ptype.reindex(active["cid"].to_numpy()).to_numpy()
    counts = pd.crosstab(active["period"].to_numpy(), kinds)
    for p in ("Ins", "Css"):
        if p not in counts.columns:
            counts[p] = 0
    periods = np.sort(np.unique(np.r_[tx["period"].to_numpy(), prod["period"].to_numpy()]))
    counts = counts.reindex(periods, fill_value=0)
    css_apps = prod[prod["product"] == "Css"].groupby("period").size()
    out = pd.DataFrame({
        "period": periods,
        "active_ins": counts["Ins"].to_numpy(np.int64),
        "active_css": counts["Css"].to_numpy(np.int64),
    })
    out["active"] = out["active_ins"] + out["active_css"]
    nxt = np.array([add_months(int(p), 1) for p in periods])
    out["css_applications_next"] = css_apps.reindex(nxt, fill_value=0).to_numpy(np.int64)
    last = nxt > periods.max()
    with np.errstate(invalid="ignore", divide="ignore"):
        rate = out["css_applications_next"].to_numpy(float) / out["active"].to_numpy(float)
    rate[last | (out["active"].to_numpy() == 0)] = np.nan
    out["response_rate"] = rate
    return out


def controlled_gini_scores(true_index, noise: float, seed: int) -> np.ndarray:
    """Risk ranking of a model with reduced power.

    The standardized ground-truth risk index is blended with seeded standard
    normal noise: ``cos(t) * z + sin(t) * e`` with ``t = noise * pi / 2``.
    ``noise=0`` is the oracle ranking and ``noise=1`` pure noise.
    """
    if not 0.0 <= noise <= 1.0:
        raise ValueError("noise must lie in [0, 1]")
    x = np.asarray(true_index, dtype=float)
    z = (x - x.mean()) / (x.std() or 1.0)
    e = np.random.default_rng(seed).standard_normal(len(z))
    t = noise * np.pi / 2.0
    return np.cos(t) * z + np.sin(t) * e


def power_profit_experiment(world, noise_levels=(0.0, 0.2, 0.4, 0.6, 0.8, 1.0), *,
                            pricing: PricingParams = TABLE_PRICING, seed: int = 0,
                            amount: float = 5000.0, n_installments: int = 36,
                            periods=None) -> pd.DataFrame:
    """Best-cut-off profit for a family of models of decreasing power.

    Every application gets the same loan (``amount``, ``n_installments``) and
    ``pricing``; outcomes are the ground-truth ``default_12`` flags.

    Returns:
        One row per noise level, sorted by decreasing Gini: ``noise``,
        ``gini``, ``best_profit``, ``best_acceptance_rate``,
        ``full_acceptance_profit`` and the changes against the strongest
        model (``delta_gini``, ``delta_profit``, ``delta_acceptance_rate``).
    """
    prod = world.production
    if periods is not None:
        prod = prod[prod["period"].between(*periods)]
    y = prod["default_12"].to_numpy().astype(bool)
    a = np.full(len(prod), float(amount))
    n = np.full(len(prod), int(n_installments))
    rows = []
    for i, lvl in enumerate(noise_levels):
        risk = controlled_gini_scores(prod["true_risk_index"].to_numpy(), float(lvl), seed + i)
        curve = profit_curve(risk, a, n, y, pricing)
        thr, best = best_cutoff(curve)
        k = int(np.flatnonzero(curve.threshold == thr)[-1])
        rows.append({
            "noise": float(lvl),
            "gini": gini(risk, y.astype(float)),
            "best_profit": best,
            "best_acceptance_rate": float(curve.acceptance_rate[k]),
            "full_acceptance_profit": float(curve.profit[-1]),
        })
    out = pd.DataFrame(rows).sort_values("gini", ascending=False, kind="stable").reset_index(drop=True)
    out["delta_gini"] = out["gini"] - out["gini"].iloc[0]
    out["delta_profit"] = out["best_profit"] - out["best_profit"].iloc[0]
    out["delta_acceptance_rate"] = out["best_acceptance_rate"] - out["best_acceptance_rate"].iloc[0]
    return out


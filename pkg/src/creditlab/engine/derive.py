"""Cut-off derivation from profit curves and the PD x PR segment grid.

The cash cut-off is the profit-maximising PD_Css threshold.  Instalment
applications are then grouped by PD_Ins and PR_Css; each cell's global
profit adds the profit of the same customers' future cash loans that pass
the cash cut-off.  From the grid:

* ``pd_high``: largest PD_Ins of the riskiest PD group that still has a
  profitable cell (reject above it);
* ``pd_low``: largest PD_Ins of the riskiest PD group, counted from the
  safest, whose cells are all profitable;
* ``pr_min``: smallest PR_Css among the profitable cells between the two
  (reject responders below it in that band, or a high Cross_PD_Css).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from creditlab.engine.strategy import Strategy
from creditlab.finance import (
    CSS_PRICING,
    INS_PRICING,
    SegmentGrid,
    best_cutoff,
    loan_cents,
    profit_curve,
    segment_grid,
)
from creditlab.training import TRAIN_FROM, TRAIN_TO, attribute_css


@dataclass(frozen=True)
class CutoffPlan:
    css_cut: float
    pd_high: float
    pd_low: float
    pr_min: float
    grid: SegmentGrid | None = None
    css_curve_profit: float = float("nan")

    def halved(self) -> "CutoffPlan":
        """Stronger cut: every PD threshold halved."""
        return CutoffPlan(self.css_cut / 2, self.pd_high / 2, self.pd_low / 2, self.pr_min,
                          self.grid, self.css_curve_profit)

    def strategy(self, special: bool = True, id: str | None = None) -> Strategy:
        def pct(x):
            return f"{100.0 * x:.4f}%"

        ins = [("PD_Ins Cutoff", f"PD_Ins>{pct(self.pd_high)}")]
        if special:
            ins.append(("Special for PD and PR",
                        f"{pct(self.pd_high)}>=PD_Ins>{pct(self.pd_low)} and "
                        f"(PR_Css<{pct(self.pr_min)} or Cross_PD_Css>{pct(self.css_cut)})"))
        css = [("PD_Css Cutoff", f"PD_Css>{pct(self.css_cut)}")]
        sid = id or ("derived_special" if special else "derived_cutoffs")
        return Strategy.from_rules(sid, ins, css, "cut-offs derived from profit curves and the segment grid")


def future_cash_profit(world, full: pd.DataFrame, css_cut: float, periods=(TRAIN_FROM, TRAIN_TO),
                       pricing=CSS_PRICING) -> pd.Series:
    """Per instalment cid: summed profit of attributed cash loans in the window passing the cut."""
    prod = world.production
    css_mask = ((prod["product"] == "Css") & prod["period"].between(*periods)).to_numpy()
    css = prod[css_mask]
    owner = attribute_css(world.ins_production, css)
    inc, los = loan_cents(css["app_loan_amount"].to_numpy(), css["app_n_installments"].to_numpy(),
                          css["default_12"].to_numpy().astype(bool), pricing)
    passes = full.loc[css_mask, "PD_Css"].to_numpy() <= css_cut
    keep = (owner >= 0) & passes
    cents = pd.Series(inc - los, index=owner)[keep]
    return cents.groupby(level=0).sum() / 100.0


def derive_cutoffs(world, full: pd.DataFrame, periods=(TRAIN_FROM, TRAIN_TO), n_groups: int = 5,
                   ins_pricing=INS_PRICING, css_pricing=CSS_PRICING) -> CutoffPlan:
    """Cut-offs from full-information scores (``full`` aligned to ``world.production``)."""
    prod = world.production
    window = prod["period"].between(*periods).to_numpy()
    css = (prod["product"] == "Css").to_numpy() & window
    curve = profit_curve(full.loc[css, "PD_Css"].to_numpy(), prod.loc[css, "app_loan_amount"],
                         prod.loc[css, "app_n_installments"], prod.loc[css, "default_12"].astype(bool),
                         css_pricing)
    css_cut, css_profit = best_cutoff(curve)
    css_cut = max(css_cut, 0.0)

    ins = (prod["product"] == "Ins").to_numpy() & window
    i_inc, i_los = loan_cents(prod.loc[ins, "app_loan_amount"].to_numpy(),
                              prod.loc[ins, "app_n_installments"].to_numpy(),
                              prod.loc[ins, "default_12"].to_numpy().astype(bool), ins_pricing)
    fut = future_cash_profit(world, full, css_cut, periods, css_pricing)
    fut_aligned = fut.reindex(prod.loc[ins, "cid"].to_numpy()).fillna(0.0).to_numpy()
    pd_ins = full.loc[ins, "PD_Ins"].to_numpy()
    pr = full.loc[ins, "PR_Css"].to_numpy()
    grid = segment_grid(pd_ins, pr, (i_inc - i_los) / 100.0, fut_aligned, n_groups)
    cells = grid.cells
    profitable = cells[cells["profit"] > 0]
    if profitable.empty:
        lowest = float(np.min(pd_ins))
        return CutoffPlan(css_cut, lowest, lowest, 0.0, grid, css_profit)
    g_hi = int(profitable["pd_group"].max())
    pd_high = float(cells.loc[cells["pd_group"] == g_hi, "max_pd"].max())
    g_lo = -1
    for g in sorted(cells["pd_group"].unique()):
        if (cells.loc[cells["pd_group"] == g, "profit"] > 0).all():
            g_lo = int(g)
        else:
            break
    if g_lo >= 0:
        pd_low = float(cells.loc[cells["pd_group"] == g_lo, "max_pd"].max())
    else:
        pd_low = float(np.min(pd_ins))
    band = profitable[profitable["pd_group"] > g_lo]
    pr_min = float(band["min_pr"].min()) if len(band) else float(np.max(pr))
    return CutoffPlan(css_cut, pd_high, pd_low, pr_min, grid, css_profit)

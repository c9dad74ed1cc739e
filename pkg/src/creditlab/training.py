"""Model targets and training of the four decision models.

* PD_Ins: ``default_12`` of instalment applications.
* PD_Css: ``default_12`` of cash applications.
* PR_Css: an instalment application is a responder when at least one cash
  application of the same customer is attributed to it.
* Cross_PD_Css: ``default_12`` of the first cash loan attributed to an
  instalment application (applications without one are not modelled).

A cash application is attributed to the customer's most recent instalment
application opened in an earlier month.
"""

from __future__ import annotations

import numpy as np
import pandas as pd

from creditlab.abt import build_abt
from creditlab.scorecard import MODEL_NAMES, BinningSpec, ModelSuite, fit_scorecard

TRAIN_FROM = 197501
TRAIN_TO = 198712
MODEL_PRODUCT = {"PD_Ins": "Ins", "PD_Css": "Css", "Cross_PD_Css": "Ins", "PR_Css": "Ins"}
ID_COLUMNS = ("cid", "aid", "period")
PROBABILITY_NAMES = {"PD_Ins": "pd_ins", "PD_Css": "pd_css", "Cross_PD_Css": "cross_pd_css",
                     "PR_Css": "pr_css"}


def attribute_css(ins: pd.DataFrame, css: pd.DataFrame) -> np.ndarray:
    """For each cash application, the ``cid`` of the attributed instalment application (-1 if none)."""
    if len(css) == 0:
        return np.empty(0, dtype=np.int64)
    left = pd.DataFrame({"pos": np.arange(len(css)), "aid": css["aid"].to_numpy(np.int64),
                         "period": css["period"].to_numpy(np.int64)}).sort_values("period", kind="stable")
    right = (pd.DataFrame({"aid": ins["aid"].to_numpy(np.int64), "period": ins["period"].to_numpy(np.int64),
                           "ins_cid": ins["cid"].to_numpy(np.int64)})
             .sort_values(["period", "ins_cid"], kind="stable")
             .drop_duplicates(["aid", "period"], keep="last"))
    merged = pd.merge_asof(left, right, on="period", by="aid", allow_exact_matches=False,
                           direction="backward")
    out = np.full(len(css), -1, dtype=np.int64)
    hit = merged["ins_cid"].notna().to_numpy()
    out[merged["pos"].to_numpy()[hit]] = merged["ins_cid"].to_numpy()[hit].astype(np.int64)
    return out


def model_targets(world) -> pd.DataFrame:
    """Per instalment application: responder flag, attributed cash count and cross default."""
    ins, css = world.ins_production, world.css_production
    owner = attribute_css(ins, css)
    linked = css.assign(ins_cid=owner)[owner >= 0].sort_values(["period", "cid"], kind="stable")
    first = linked.drop_duplicates("ins_cid", keep="first").set_index("ins_cid")["default_12"]
    n_css = linked.groupby("ins_cid").size()
    cids = ins["cid"].to_numpy()
    out = pd.DataFrame({"cid": cids})
    out["n_future_css"] = n_css.reindex(cids).fillna(0).astype(int).to_numpy()
    out["response"] = (out["n_future_css"] > 0).astype(int)
    out["cross_default_12"] = first.reindex(cids).to_numpy(dtype=float)
    return out


def training_rows(model: str, world, abt: pd.DataFrame, period_from=TRAIN_FROM,
                  period_to=TRAIN_TO) -> tuple[pd.DataFrame, np.ndarray]:
    """ABT rows and the binary target of ``model`` within the training window."""
    product = MODEL_PRODUCT[model]
    prod = world.production
    mask = ((prod["product"] == product) & (prod["period"] >= period_from)
            & (prod["period"] <= period_to)).to_numpy()
    rows = abt[mask]
    if model in ("PD_Ins", "PD_Css"):
        y = prod.loc[mask, "default_12"].to_numpy(float)
    else:
        tg = model_targets(world).set_index("cid").loc[prod.loc[mask, "cid"].to_numpy()]
        y = (tg["response"] if model == "PR_Css" else tg["cross_default_12"]).to_numpy(float)
        keep = ~np.isnan(y)
        rows, y = rows[keep], y[keep]
    return rows, y


def candidate_columns(abt: pd.DataFrame) -> list[str]:
    return [c for c in abt.columns if c not in ID_COLUMNS and not c.startswith("default_")]


def train_suite(world, abt: pd.DataFrame | None = None, period_from=TRAIN_FROM,
                period_to=TRAIN_TO, spec: BinningSpec | None = None) -> ModelSuite:
    """Fit the four models on full-universe ABT rows from the training window."""
    if abt is None:
        abt = build_abt(world, with_targets=False)
    abt = abt.reset_index(drop=True)
    cards = {}
    for model in MODEL_NAMES:
        rows, y = training_rows(model, world, abt, period_from, period_to)
        frame = rows[candidate_columns(rows)].assign(_target=y)
        card = fit_scorecard(frame, "_target", spec, name=model.replace("_", " "))
        cards[model] = type(card)(card.name, card.variables, card.calibration,
                                  score_name=f"{PROBABILITY_NAMES[model]}_score",
                                  probability_name=PROBABILITY_NAMES[model],
                                  reported=card.reported)
    return ModelSuite(**cards)


def score_suite(suite: ModelSuite, abt: pd.DataFrame) -> pd.DataFrame:
    """Model probabilities for every ABT row, one column per model name."""
    from creditlab.scorecard import predict

    return pd.DataFrame({name: predict(abt, card) for name, card in suite.items()}, index=abt.index)

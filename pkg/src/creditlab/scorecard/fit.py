"""WoE scorecard fitting: coarse classing, variable selection, logistic fit, points."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import LogisticRegression

from creditlab.scorecard.metrics import gini
from creditlab.scorecard.model import Bin, Calibration, Scorecard, Variable, score


class FitError(ValueError):
    """Raised when a scorecard cannot be fitted."""


@dataclass(frozen=True)
class BinningSpec:
    """Fitting options.

    ``points_per_logit`` converts risk log-odds into points (20 points to
    double the odds by default); ``anchor`` is the partial score given to
    the worst bin of every variable.
    """

    max_bins: int = 6
    min_share: float = 0.05
    n_prebins: int = 20
    min_iv: float = 0.02
    max_variables: int = 8
    max_correlation: float = 0.75
    points_per_logit: float = 20.0 / math.log(2.0)
    anchor: int = -1
    smoothing: float = 0.5


@dataclass
class _Group:
    """A working bin during classing."""

    key: object  # upper edge for numeric bins, tuple of categories otherwise
    bad: float
    n: float

    @property
    def rate(self) -> float:
        return self.bad / self.n


def _merge(groups: list, i: int, numeric: bool) -> None:
    a, b = groups[i], groups[i + 1]
    key = b.key if numeric else a.key + b.key
    groups[i:i + 2] = [_Group(key, a.bad + b.bad, a.n + b.n)]


def _coarse(groups: list, total: int, spec: BinningSpec, numeric: bool) -> list:
    if numeric and len(groups) > 1:
        idx = np.arange(len(groups), dtype=float)
        rates = np.array([g.rate for g in groups])
        w = np.array([g.n for g in groups])
        slope = np.cov(idx, rates, aweights=w)[0, 1]
        sign = 1.0 if slope >= 0 else -1.0
        i = 0
        while i < len(groups) - 1:
            if sign * (groups[i + 1].rate - groups[i].rate) < 0:
                _merge(groups, i, numeric)
                i = max(i - 1, 0)
            else:
                i += 1
    while len(groups) > 1:
        small = [j for j, g in enumerate(groups) if g.n < spec.min_share * total]
        if not small:
            break
        j = min(small, key=lambda k: groups[k].n)
        if j == 0:
            _merge(groups, 0, numeric)
        elif j == len(groups) - 1:
            _merge(groups, j - 1, numeric)
        else:
            left = abs(groups[j].rate - groups[j - 1].rate)
            right = abs(groups[j + 1].rate - groups[j].rate)
            _merge(groups, j - 1 if left <= right else j, numeric)
    while len(groups) > spec.max_bins:
        gaps = [abs(groups[j + 1].rate - groups[j].rate) for j in range(len(groups) - 1)]
        _merge(groups, int(np.argmin(gaps)), numeric)
    return groups


@dataclass
class _Classing:
    name: str
    bins: list  # Bin objects with placeholder points
    assign: np.ndarray  # bin index per training row
    bad: np.ndarray
    n: np.ndarray


def _class_numeric(name, x, y, spec) -> _Classing:
    total = len(x)
    miss = np.isnan(x)
    xs, ys = x[~miss], y[~miss]
    bins, groups = [], []
    if len(xs):
        qs = np.quantile(xs, np.linspace(0, 1, spec.n_prebins + 1)[1:-1], method="lower")
        edges = np.unique(qs)
        edges = edges[edges < xs.max()]
        idx = np.searchsorted(edges, xs, side="left")
        bad = np.bincount(idx, weights=ys, minlength=len(edges) + 1)
        n = np.bincount(idx, minlength=len(edges) + 1).astype(float)
        uppers = list(edges) + [None]
        groups = [_Group(u, b, c) for u, b, c in zip(uppers, bad, n) if c > 0]
        groups = _coarse(groups, total, spec, numeric=True)
        lo = None
        for g in groups:
            hi = None if g.key is None else float(g.key)
            bins.append(Bin("interval", 0, lo=lo, hi=hi))
            lo = hi
    assign = np.full(total, -1, dtype=np.int64)
    if bins:
        edges = np.array([b.hi for b in bins[:-1]], dtype=float)
        assign[~miss] = np.searchsorted(edges, xs, side="left")
    # missing always gets a bin; unseen in training it stays empty (neutral WoE)
    bins.append(Bin("missing", 0))
    assign[miss] = len(bins) - 1
    return _finish(name, bins, assign, y)


def _class_categorical(name, x: pd.Series, y, spec) -> _Classing:
    total = len(x)
    miss = x.isna().to_numpy()
    frame = pd.DataFrame({"x": x[~miss].to_numpy(), "y": y[~miss]})
    stats = frame.groupby("x", sort=True)["y"].agg(["sum", "count"])
    groups = [_Group((k,), float(r["sum"]), float(r["count"])) for k, r in stats.iterrows()]
    groups.sort(key=lambda g: g.rate)
    groups = _coarse(groups, total, spec, numeric=False)
    bins = [Bin("set", 0, values=tuple(sorted(g.key, key=str))) for g in groups]
    lookup = {v: j for j, b in enumerate(bins) for v in b.values}
    assign = np.full(total, -1, dtype=np.int64)
    assign[~miss] = x[~miss].map(lookup).to_numpy()
    if miss.any():
        bins.append(Bin("missing", 0))
        assign[miss] = len(bins) - 1
    return _finish(name, bins, assign, y)


def _finish(name, bins, assign, y) -> _Classing:
    k = len(bins)
    bad = np.bincount(assign, weights=y, minlength=k)
    n = np.bincount(assign, minlength=k).astype(float)
    return _Classing(name, bins, assign, bad, n)


def woe_table(c: _Classing, smoothing: float = 0.5):
    """Risk WoE per bin (positive = riskier than average) and information value."""
    bad, good = c.bad, c.n - c.bad
    tb, tg = bad.sum(), good.sum()
    seen = c.n > 0
    k = int(seen.sum())
    pb = np.where(seen, (bad + smoothing) / (tb + smoothing * k), 0.0)
    pg = np.where(seen, (good + smoothing) / (tg + smoothing * k), 0.0)
    woe = np.zeros(len(bad))
    woe[seen] = np.log(pb[seen] / pg[seen])
    iv = float(np.sum((pb - pg) * woe))
    return woe, iv


def _logit(x: np.ndarray, y: np.ndarray):
    model = LogisticRegression(penalty=None, max_iter=2000)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        warnings.simplefilter("ignore", RuntimeWarning)
        model.fit(x, y)
    return model.coef_[0], float(model.intercept_[0])


def fit_scorecard(rows: pd.DataFrame, target: str, spec: BinningSpec | None = None,
                  candidates=None, name: str = "fitted") -> Scorecard:
    """Fit a WoE logistic scorecard and its calibration.

    Args:
        rows: training rows; numeric columns are classed into ``(lo, hi]``
            intervals, object/categorical columns into category sets.
        target: binary target column (1 = event).
        spec: fitting options.
        candidates: candidate variable names (defaults to every other column).
        name: name stored in the card.

    Returns:
        The fitted card; its calibration maps total points to the event
        probability. ``reported`` holds the training Gini and per-variable IV.
    """
    spec = spec or BinningSpec()
    y_raw = rows[target]
    if y_raw.isna().any():
        raise FitError("target contains missing values")
    y = y_raw.to_numpy(dtype=float)
    if not np.isin(y, (0.0, 1.0)).all():
        raise FitError("target must be binary")
    if y.min() == y.max():
        raise FitError("degenerate target: a single class")
    if candidates is None:
        candidates = [c for c in rows.columns if c != target]
    candidates = list(candidates)
    if not candidates:
        raise FitError("need at least one candidate variable")

    classed = []
    for col in candidates:
        s = rows[col]
        if pd.api.types.is_numeric_dtype(s) and not pd.api.types.is_bool_dtype(s):
            c = _class_numeric(col, s.to_numpy(dtype=float), y, spec)
        else:
            c = _class_categorical(col, s.astype(object).where(s.notna(), None), y, spec)
        if int((c.n > 0).sum()) < 2:
            continue
        woe, iv = woe_table(c, spec.smoothing)
        classed.append((iv, c, woe))
    if not classed:
        raise FitError("no candidate variable splits the data")
    classed.sort(key=lambda t: -t[0])

    # forward selection by IV: a candidate enters when it is not too correlated
    # with the chosen ones and every coefficient stays positive after refitting
    selected, columns, beta = [], [], None
    for iv, c, woe in classed:
        if len(selected) >= spec.max_variables:
            break
        if iv < spec.min_iv and selected:
            break
        col = woe[c.assign]
        if columns and np.std(col) > 0:
            corr = [abs(np.corrcoef(col, other)[0, 1]) for other in columns]
            if max(corr) >= spec.max_correlation:
                continue
        trial, _ = _logit(np.column_stack(columns + [col]), y)
        if (trial > 0).all() or not selected:
            selected.append((iv, c, woe))
            columns.append(col)
            beta = trial
    beta = np.maximum(beta, 0.0)

    variables = []
    for b, (_, c, woe) in zip(beta, selected):
        contrib = b * woe
        pts = spec.anchor + np.rint(spec.points_per_logit * (contrib.max() - contrib)).astype(int)
        bins = tuple(Bin(bn.kind, int(p), bn.lo, bn.hi, bn.values) for bn, p in zip(c.bins, pts))
        variables.append(Variable(c.name, bins))
    card = Scorecard(name, tuple(variables), Calibration(0.0, 0.0))

    points = score(rows, card).astype(float)
    sd = points.std()
    if sd == 0:
        a, b0 = 0.0, float(math.log(y.mean() / (1.0 - y.mean())))
    else:
        mu = points.mean()
        (slope,), icpt = _logit(((points - mu) / sd)[:, None], y)
        a, b0 = float(slope / sd), float(icpt - slope * mu / sd)
    reported = {
        "gini_train": gini(-points, y),
        "iv": {c.name: iv for iv, c, _ in selected},
    }
    return Scorecard(name, tuple(variables), Calibration(a, b0), reported=reported)

"""Scorecard representation, scoring and JSON persistence."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd


class BinCoverageError(ValueError):
    """A value matched no bin of a scorecard variable."""


class ScorecardFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Bin:
    """One attribute of a variable.

    ``kind`` is ``interval`` (``lo < x <= hi``, ``None`` for an open end),
    ``set`` (categorical membership) or ``missing``.
    """

    kind: str
    points: int
    lo: float | None = None
    hi: float | None = None
    values: tuple = ()

    def matches(self, values: pd.Series) -> np.ndarray:
        if self.kind == "missing":
            return values.isna().to_numpy()
        if self.kind == "set":
            return values.isin(self.values).to_numpy()
        x = pd.to_numeric(values, errors="coerce").to_numpy(dtype=float)
        ok = ~np.isnan(x)
        if self.lo is not None:
            ok &= x > self.lo
        if self.hi is not None:
            ok &= x <= self.hi
        return ok

    def describe(self, name: str) -> str:
        if self.kind == "missing":
            return f"missing {name}"
        if self.kind == "set":
            return ", ".join(map(str, self.values))
        parts = []
        if self.lo is not None:
            parts.append(f"{self.lo!r} < ")
        parts.append(name)
        if self.hi is not None:
            parts.append(f" <= {self.hi!r}")
        return "".join(parts)

    def to_dict(self) -> dict:
        if self.kind == "missing":
            cond = {"type": "missing"}
        elif self.kind == "set":
            cond = {"type": "set", "values": list(self.values)}
        else:
            cond = {"type": "interval", "lo": self.lo, "hi": self.hi}
        return {"condition": cond, "points": self.points}

    @classmethod
    def from_dict(cls, d: dict) -> "Bin":
        cond = d["condition"]
        kind = cond["type"]
        pts = d["points"]
        if not isinstance(pts, int):
            raise ScorecardFormatError(f"partial score must be an integer, got {pts!r}")
        if kind == "missing":
            return cls("missing", pts)
        if kind == "set":
            return cls("set", pts, values=tuple(cond["values"]))
        if kind == "interval":
            return cls("interval", pts, lo=cond.get("lo"), hi=cond.get("hi"))
        raise ScorecardFormatError(f"unknown condition type {kind!r}")


@dataclass(frozen=True)
class Variable:
    name: str
    bins: tuple

    def partial(self, values: pd.Series) -> np.ndarray:
        """Partial score per row; raises when a value matches no bin or several."""
        hits = np.column_stack([b.matches(values) for b in self.bins])
        n_hit = hits.sum(axis=1)
        bad = np.flatnonzero(n_hit != 1)
        if len(bad):
            i = bad[0]
            what = "no bin" if n_hit[i] == 0 else "several bins"
            v = values.iloc[i]
            v = v.item() if hasattr(v, "item") else v
            raise BinCoverageError(f"{self.name}: value {v!r} matches {what}")
        pts = np.array([b.points for b in self.bins], dtype=np.int64)
        return pts[hits.argmax(axis=1)]

    @property
    def worst_points(self) -> int:
        return min(b.points for b in self.bins)


@dataclass(frozen=True)
class Calibration:
    """probability = 1 / (1 + exp(-(a * score + b)))."""

    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ScorecardFormatError("calibration coefficients must be finite")


@dataclass(frozen=True)
class Scorecard:
    name: str
    variables: tuple
    calibration: Calibration
    score_name: str = "score"
    probability_name: str = "probability"
    reported: dict = field(default_factory=dict, compare=False)

    @property
    def variable_names(self) -> list[str]:
        return [v.name for v in self.variables]

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "score_name": self.score_name,
            "probability_name": self.probability_name,
            "calibration": {"a": self.calibration.a, "b": self.calibration.b},
            "variables": [
                {"name": v.name, "bins": [b.to_dict() for b in v.bins]} for v in self.variables
            ],
        }
        if self.reported:
            d["reported"] = self.reported
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "Scorecard":
        try:
            variables = tuple(
                Variable(v["name"], tuple(Bin.from_dict(b) for b in v["bins"]))
                for v in d["variables"]
            )
            cal = Calibration(float(d["calibration"]["a"]), float(d["calibration"]["b"]))
        except (KeyError, TypeError) as exc:
            raise ScorecardFormatError(f"malformed scorecard: {exc}") from exc
        return cls(d["name"], variables, cal, d.get("score_name", "score"),
                   d.get("probability_name", "probability"), d.get("reported", {}))

    @classmethod
    def from_json(cls, text: str) -> "Scorecard":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Scorecard":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def _resolve(frame: pd.DataFrame, name: str) -> str:
    if name in frame.columns:
        return name
    lower = {c.lower(): c for c in frame.columns}
    hit = lower.get(name.lower())
    if hit is None:
        raise KeyError(f"row has no variable {name!r}")
    return hit


def _as_frame(rows) -> pd.DataFrame:
    if isinstance(rows, pd.DataFrame):
        return rows
    if isinstance(rows, pd.Series):
        return rows.to_frame().T.infer_objects()
    return pd.DataFrame([rows])


def partial_scores(rows, card: Scorecard) -> pd.DataFrame:
    frame = _as_frame(rows)
    return pd.DataFrame({v.name: v.partial(frame[_resolve(frame, v.name)]) for v in card.variables},
                        index=frame.index)


def score(rows, card: Scorecard):
    """Total points; a scalar for a single row (dict/Series), an array for a frame."""
    frame = _as_frame(rows)
    total = np.zeros(len(frame), dtype=np.int64)
    for v in card.variables:
        total += v.partial(frame[_resolve(frame, v.name)])
    if isinstance(rows, pd.DataFrame):
        return total
    return int(total[0])


def to_probability(points, cal: Calibration):
    """Inverse-logit calibration of scorecard points."""
    return 1.0 / (1.0 + np.exp(-(cal.a * np.asarray(points, dtype=float) + cal.b)))


def predict(rows, card: Scorecard) -> np.ndarray:
    return to_probability(score(_as_frame(rows), card), card.calibration)

"""WoE scorecards: representation, shipped models, fitting and metrics."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from creditlab.scorecard.fit import BinningSpec, FitError, fit_scorecard, woe_table
from creditlab.scorecard.metrics import MetricError, concordance, gini, lift, lift_table
from creditlab.scorecard.model import (
    Bin,
    BinCoverageError,
    Calibration,
    Scorecard,
    ScorecardFormatError,
    Variable,
    partial_scores,
    predict,
    score,
    to_probability,
)

MODEL_NAMES = ("PD_Ins", "PD_Css", "Cross_PD_Css", "PR_Css")
_FIXTURE_FILES = {
    "PD_Ins": "pd_ins.json",
    "PD_Css": "pd_css.json",
    "Cross_PD_Css": "cross_pd_css.json",
    "PR_Css": "pr_css.json",
}


def fixture_text(model: str) -> str:
    """Raw JSON of a shipped scorecard."""
    return resources.files("creditlab.scorecard").joinpath(
        "fixtures", _FIXTURE_FILES[model]).read_text(encoding="utf-8")


def load_fixture(model: str) -> Scorecard:
    return Scorecard.from_json(fixture_text(model))


@dataclass(frozen=True)
class ModelSuite:
    """The four decision models."""

    PD_Ins: Scorecard
    PD_Css: Scorecard
    Cross_PD_Css: Scorecard
    PR_Css: Scorecard

    def __post_init__(self):
        for name in MODEL_NAMES:
            if not isinstance(getattr(self, name), Scorecard):
                raise TypeError(f"{name} must be a Scorecard")

    def items(self):
        return [(name, getattr(self, name)) for name in MODEL_NAMES]

    def save(self, directory) -> None:
        from pathlib import Path

        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for name, card in self.items():
            card.save(d / _FIXTURE_FILES[name])

    @classmethod
    def load(cls, directory) -> "ModelSuite":
        from pathlib import Path

        d = Path(directory)
        return cls(**{name: Scorecard.load(d / f) for name, f in _FIXTURE_FILES.items()})

    @classmethod
    def fixtures(cls) -> "ModelSuite":
        return cls(**{name: load_fixture(name) for name in MODEL_NAMES})


__all__ = [
    "Bin", "BinCoverageError", "BinningSpec", "Calibration", "FitError", "MODEL_NAMES",
    "MetricError", "ModelSuite", "Scorecard", "ScorecardFormatError", "Variable", "concordance",
    "fit_scorecard", "fixture_text", "gini", "lift", "lift_table", "load_fixture",
    "partial_scores", "predict", "score", "to_probability", "woe_table",
]

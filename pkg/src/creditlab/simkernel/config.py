"""Generator configuration."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from creditlab.periods import months_between, to_index, validate_period
from creditlab.simkernel.matrix import parametric_matrix, validate_matrix


class ConfigError(ValueError):
    """Raised for inconsistent generator configuration."""


def _default_matrix() -> tuple:
    m = parametric_matrix(
        worsen=(0.030, 0.30, 0.42, 0.52, 0.60, 0.66, 0.72),
        stay=(0.970, 0.22, 0.18, 0.16, 0.15, 0.14, 0.13),
        cure=(0.0, 0.48, 0.30, 0.20, 0.14, 0.10, 0.07),
    )
    return tuple(tuple(float(x) for x in row) for row in m)


@dataclass(frozen=True)
class MacroCycle:
    """Sinusoidal macro-economic multiplier on the worsening odds."""

    amplitude: float = 0.35
    cycle_months: int = 240
    peak_period: int = 198001

    def log_multiplier(self, period):
        t = to_index(period, self.peak_period)
        return self.amplitude * np.cos(2.0 * np.pi * np.asarray(t, dtype=float) / self.cycle_months)

    def multiplier(self, period):
        return np.exp(self.log_multiplier(period))


@dataclass(frozen=True)
class BehaviorWeights:
    """Linear behaviour-score index; higher score means a better account.

    The static part (``intercept`` down to ``css_penalty``) is fixed at
    origination; the dynamic part is re-evaluated each month from the
    customer's history.
    """

    intercept: float = 1.9
    latent: float = 0.5
    job_code: dict = field(default_factory=lambda: {
        "Contract": -1.35, "Owner company": -0.45, "Retired": 0.15, "Permanent": 0.75})
    marital_status: dict = field(default_factory=lambda: {
        "Single": -0.9, "Divorced": -0.3, "Maried": 0.3, "Widowed": 0.45})
    children: tuple = (-0.75, 0.0, 0.6)  # 0, 1, 2+
    age_per_year: float = 0.02  # relative to age 40
    log_income: float = 0.3  # per log-unit relative to the median income
    log_amount: float = -0.6  # per log-unit relative to 5000
    credit_capacity: float = -1.5  # per unit of (instalment + spendings) / income above 0.5
    css_penalty: float = 1.2
    due: float = 0.5
    other_due: float = 0.9
    other_loans: float = 0.3
    other_loans_cap: int = 3
    last_loan: float = 0.3
    seasoning: float = 0.08  # per month on book
    seasoning_cap: int = 12
    bad_history: float = 1.5
    bad_history_cap: int = 3


@dataclass(frozen=True)
class PropensityWeights:
    """Monthly cash-loan response index for customers active last month."""

    appetite: float = 1.2
    risk_correlation: float = -0.3  # corr(appetite, latent risk)
    age_per_year: float = 0.03
    log_income: float = 0.6
    log_css_loans: float = 1.5
    css_active: float = -0.8  # per open cash loan
    delinquent: float = 0.0


@dataclass(frozen=True)
class Demographics:
    age_mean: float = 38.0
    age_sd: float = 12.0
    age_min: float = 18.0
    age_max: float = 75.0
    income_median: float = 1200.0
    income_sigma: float = 0.6
    spendings_share: tuple = (2.0, 5.0)  # beta(a, b) share of income
    children_mean: float = 1.0
    branch: dict = field(default_factory=lambda: {
        "Agriculture": 0.10, "Industry": 0.25, "Services": 0.35, "Trade": 0.20, "Public": 0.10})
    gender: dict = field(default_factory=lambda: {"Female": 0.5, "Male": 0.5})
    job_code: dict = field(default_factory=lambda: {
        "Contract": 0.30, "Owner company": 0.10, "Retired": 0.15, "Permanent": 0.45})
    marital_status: dict = field(default_factory=lambda: {
        "Single": 0.35, "Divorced": 0.12, "Maried": 0.45, "Widowed": 0.08})
    city: dict = field(default_factory=lambda: {
        "Village": 0.25, "Small": 0.25, "Medium": 0.25, "Large": 0.25})
    home_status: dict = field(default_factory=lambda: {
        "Owner": 0.55, "Rental": 0.30, "With parents": 0.15})
    cars: dict = field(default_factory=lambda: {"No": 0.45, "Owner": 0.45, "Company": 0.10})


@dataclass(frozen=True)
class GenConfig:
    n_customers: int = 8000
    start_period: int = 197501
    end_period: int = 199812
    outcome_months: int = 12
    ins_amount_median: float = 4500.0
    ins_amount_sigma: float = 0.5
    ins_amount_bounds: tuple = (500.0, 30000.0)
    ins_terms: tuple = (12, 24, 36, 48)
    ins_term_probs: tuple = (0.2, 0.3, 0.3, 0.2)
    ins_apr: float = 0.01
    cash_amount: float = 5000.0
    cash_term: int = 24
    css_apr: float = 0.18
    repeat_ins_rate: float = 0.02
    response_rate_target: float = 0.11  # per eligible customer; about 5% per active account
    base_matrix: tuple = field(default_factory=_default_matrix)
    bracket_cuts: tuple = (-2.5, -1.5, -0.75, 0.0, 0.75, 1.5, 2.5)
    bracket_shifts: tuple = (2.4, 1.7, 1.1, 0.5, 0.0, -0.7, -1.5, -2.6)
    macro: MacroCycle = field(default_factory=MacroCycle)
    behavior: BehaviorWeights = field(default_factory=BehaviorWeights)
    propensity: PropensityWeights = field(default_factory=PropensityWeights)
    demographics: Demographics = field(default_factory=Demographics)
    risk_shift: float = -0.25  # calibrated: default_12 about 47% over the window
    seed: int = 20140101

    def __post_init__(self):
        validate_config(self)

    @property
    def n_months(self) -> int:
        return months_between(self.start_period, self.end_period) + 1

    @property
    def last_application_index(self) -> int:
        return self.n_months - 1 - self.outcome_months

    @property
    def n_brackets(self) -> int:
        return len(self.bracket_shifts)

    def replace(self, **changes) -> "GenConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> "GenConfig":
        data = dict(data)
        nested = {"macro": MacroCycle, "behavior": BehaviorWeights,
                  "propensity": PropensityWeights, "demographics": Demographics}
        for key, kind in nested.items():
            if key in data and isinstance(data[key], dict):
                data[key] = _build(kind, data[key])
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**{k: _freeze(v) if k != "base_matrix" else _freeze_matrix(v)
                      for k, v in data.items()})

    @classmethod
    def from_json(cls, text: str) -> "GenConfig":
        return cls.from_dict(json.loads(text))


def _build(kind, data: dict):
    known = {f.name for f in dataclasses.fields(kind)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown {kind.__name__} keys: {sorted(unknown)}")
    return kind(**{k: _freeze(v) for k, v in data.items()})


def _freeze(v):
    return tuple(v) if isinstance(v, list) else v


def _freeze_matrix(v):
    return tuple(tuple(float(x) for x in row) for row in v)


def validate_config(cfg: GenConfig) -> None:
    try:
        validate_period(cfg.start_period)
        validate_period(cfg.end_period)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.start_period >= cfg.end_period:
        raise ConfigError("start_period must precede end_period")
    if cfg.n_customers <= 0:
        raise ConfigError("n_customers must be positive")
    if not (0.0 <= cfg.response_rate_target < 1.0):
        raise ConfigError("response_rate_target must lie in [0, 1)")
    if cfg.cash_term <= 0 or cfg.cash_amount <= 0:
        raise ConfigError("cash loan amount and term must be positive")
    if cfg.outcome_months < 0 or cfg.n_months - cfg.outcome_months < 1:
        raise ConfigError("outcome_months leaves no application window")
    if len(cfg.ins_terms) != len(cfg.ins_term_probs) or min(cfg.ins_terms) <= 0:
        raise ConfigError("ins_terms and ins_term_probs must align and be positive")
    if not math.isclose(sum(cfg.ins_term_probs), 1.0, abs_tol=1e-9):
        raise ConfigError("ins_term_probs must sum to 1")
    if len(cfg.bracket_shifts) != len(cfg.bracket_cuts) + 1:
        raise ConfigError("need exactly one more bracket shift than cut point")
    if list(cfg.bracket_cuts) != sorted(cfg.bracket_cuts):
        raise ConfigError("bracket_cuts must be ascending")
    if any(a < b for a, b in zip(cfg.bracket_shifts, cfg.bracket_shifts[1:])):
        raise ConfigError("bracket_shifts must be non-increasing from worst to best bracket")
    if cfg.macro.cycle_months <= 0:
        raise ConfigError("macro cycle length must be positive")
    if not (0.0 <= cfg.repeat_ins_rate < 1.0):
        raise ConfigError("repeat_ins_rate must lie in [0, 1)")
    try:
        validate_matrix(cfg.base_matrix)
    except ValueError as exc:
        raise ConfigError(f"base_matrix: {exc}") from exc
    d = cfg.demographics
    for name in ("branch", "gender", "job_code", "marital_status", "city", "home_status", "cars"):
        probs = getattr(d, name)
        if not math.isclose(sum(probs.values()), 1.0, abs_tol=1e-9):
            raise ConfigError(f"demographics.{name} probabilities must sum to 1")

"""Calibration of the universe to a target global default rate."""

from __future__ import annotations

from dataclasses import dataclass, field

from creditlab.simkernel.config import GenConfig
from creditlab.simkernel.generator import generate_world


class CalibrationError(RuntimeError):
    """The search bounds do not bracket the target risk."""

    def __init__(self, message: str, achieved_range: tuple[float, float]):
        super().__init__(message)
        self.achieved_range = achieved_range


@dataclass
class CalibrationResult:
    config: GenConfig
    achieved_risk: float
    iterations: int
    history: list = field(default_factory=list)  # (risk_shift, risk) pairs evaluated


def generated_risk(cfg: GenConfig, horizon: int = 12) -> float:
    return generate_world(cfg).global_risk(horizon)


def calibrate_global_risk(cfg: GenConfig, target_risk: float = 0.47, tol: float = 0.01,
                          bounds: tuple[float, float] = (-4.0, 4.0), max_iter: int = 20,
                          horizon: int = 12) -> CalibrationResult:
    """Bisection on ``risk_shift`` until the generated default rate is within ``tol`` of target.

    The current config is evaluated first and returned unchanged when it is
    already within tolerance.  Raises :class:`CalibrationError` when the
    bounds do not bracket the target or the iteration budget runs out.
    """
    if not (0.0 < target_risk < 1.0):
        raise ValueError("target_risk must lie in (0, 1)")
    if tol <= 0:
        raise ValueError("tol must be positive")
    history = []

    def run(shift: float) -> float:
        risk = generated_risk(cfg.replace(risk_shift=float(shift)), horizon)
        history.append((float(shift), risk))
        return risk

    risk = run(cfg.risk_shift)
    if abs(risk - target_risk) <= tol:
        return CalibrationResult(cfg, risk, 0, history)

    lo, hi = bounds
    r_lo, r_hi = run(lo), run(hi)
    if not (r_lo <= target_risk <= r_hi):
        raise CalibrationError(
            f"risk_shift bounds {bounds} give default rates [{r_lo:.4f}, {r_hi:.4f}], "
            f"which do not bracket {target_risk}", (r_lo, r_hi))
    for i in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        risk = run(mid)
        if abs(risk - target_risk) <= tol:
            return CalibrationResult(cfg.replace(risk_shift=mid), risk, i, history)
        if risk < target_risk:
            lo = mid
        else:
            hi = mid
    raise CalibrationError(f"no risk_shift within tolerance after {max_iter} iterations",
                           (min(r for _, r in history), max(r for _, r in history)))

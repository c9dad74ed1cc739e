"""Ground-truth universe generator."""

from creditlab.simkernel.accounts import (
    ContractViolation,
    CustomerProfile,
    LoanAccount,
    MonthlySnapshot,
    simulate_account,
    step_account,
)
from creditlab.simkernel.calibrate import (
    CalibrationError,
    CalibrationResult,
    calibrate_global_risk,
    generated_risk,
)
from creditlab.simkernel.config import ConfigError, GenConfig, MacroCycle
from creditlab.simkernel.generator import (
    WorldDatasets,
    effective_matrix,
    generate_world,
    spawn_cash_applications,
)

__all__ = [
    "CalibrationError", "CalibrationResult", "calibrate_global_risk", "generated_risk",
    "ConfigError", "ContractViolation", "CustomerProfile", "GenConfig", "LoanAccount",
    "MacroCycle", "MonthlySnapshot", "WorldDatasets", "effective_matrix", "generate_world",
    "simulate_account", "spawn_cash_applications", "step_account",
]

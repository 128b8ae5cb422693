"""
Avoided-energy savings with a confidence interval.

  savings  = Σ_usable days [ predicted(T_d) + adjustment_d - actual_d ]
  interval = savings ± t(1 - α/2, n - p) · RMSE · sqrt(m + m²/n)

n = baseline days used in the fit, p = fitted parameters, m = usable
analysis days. The total is also extrapolated to the whole analysis window
by the usable-day fraction.
"""

import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field
from scipy import stats

from ...exceptions import InsufficientDataError
from ...logger import get_module_logger
from .baseline import ChangePointModel

logger = get_module_logger("apps.mv.savings")


class MvResult(BaseModel):
    savings_kwh: float
    ci_low: float
    ci_high: float
    confidence: float
    model: ChangePointModel
    adjustment_kwh: float = 0.0
    usable_analysis_days: int
    analysis_days: int
    baseline_days: int
    extrapolation_factor: float
    extrapolated_savings_kwh: float
    baseline_coverage: float = 1.0          # usable fraction of baseline days
    analysis_coverage: float = 1.0
    excluded_days: dict[str, dict[str, int]] = Field(default_factory=dict)   # period → reason → days
    daily_savings: list[float] = Field(default_factory=list)


def interval_half_width(model: ChangePointModel, usable_days: int, confidence: float) -> float:
    dof = model.n - model.parameters
    if dof <= 0 or model.rmse == 0.0:
        return 0.0
    quantile = float(stats.t.ppf(0.5 + confidence / 2.0, dof))
    return quantile * model.rmse * math.sqrt(usable_days + usable_days ** 2 / model.n)


def estimate_savings(model: ChangePointModel, energy, temperature, adjustments=None,
                     confidence: float = 0.95, analysis_days: Optional[int] = None) -> MvResult:
    """
    Savings over the usable analysis days.

    Args:
        model: Baseline model
        energy: Actual kWh per usable analysis day
        temperature: Mean °C per usable analysis day
        adjustments: Non-routine kWh per usable day (same length) or None
        confidence: Two-sided level in (0, 1)
        analysis_days: Days in the whole analysis window (defaults to usable days)

    Raises:
        InsufficientDataError: no usable analysis days
    """
    actual = np.asarray(energy, dtype=float)
    temps = np.asarray(temperature, dtype=float)
    m = len(actual)
    if m == 0:
        raise InsufficientDataError("No usable analysis days")
    adjust = np.zeros(m) if adjustments is None else np.asarray(adjustments, dtype=float)

    daily = model.predict(temps) + adjust - actual
    savings = float(daily.sum())
    half = interval_half_width(model, m, confidence)
    total_days = analysis_days or m
    factor = total_days / m

    result = MvResult(
        savings_kwh=savings,
        ci_low=savings - half,
        ci_high=savings + half,
        confidence=confidence,
        model=model,
        adjustment_kwh=float(adjust.sum()),
        usable_analysis_days=m,
        analysis_days=total_days,
        baseline_days=model.n,
        extrapolation_factor=factor,
        extrapolated_savings_kwh=savings * factor,
        analysis_coverage=m / total_days,
        daily_savings=[float(x) for x in daily],
    )
    logger.info(f"Savings {savings:.1f} kWh [{result.ci_low:.1f}, {result.ci_high:.1f}] over {m} days")
    return result

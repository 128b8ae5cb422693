"""
Change-point baseline model of daily energy against daily mean temperature.

  E_d = b0 + bh * max(0, th - T_d) + bc * max(0, T_d - tc)

Variants: baseload-only (1 parameter), heating (b0, bh, th), cooling
(b0, bc, tc), heating+cooling (5 parameters, th <= tc). Change points are
grid-searched over the observed temperature range in 0.5 °C steps; for fixed
change points the coefficients are the least-squares fit with slopes
bounded at zero. The variant with the highest adjusted R² wins; a more complex variant
must strictly improve on a simpler one.
"""

import itertools
import math
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel

from ...exceptions import InsufficientDataError
from ...logger import get_module_logger

logger = get_module_logger("apps.mv.baseline")

MIN_FIT_DAYS = 30
GRID_STEP = 0.5

Variant = Literal["baseload", "heating", "cooling", "heating+cooling"]

PARAMETERS = {"baseload": 1, "heating": 3, "cooling": 3, "heating+cooling": 5}


class ChangePointModel(BaseModel):
    variant: Variant
    beta0: float                          # kWh/day
    beta_h: float = 0.0                   # kWh/day per °C below tau_h
    tau_h: Optional[float] = None
    beta_c: float = 0.0                   # kWh/day per °C above tau_c
    tau_c: Optional[float] = None
    n: int
    sse: float
    rmse: float                           # sqrt(sse / (n - p))
    r2: float
    adj_r2: float

    @property
    def parameters(self) -> int:
        return PARAMETERS[self.variant]

    def predict(self, temperature) -> np.ndarray:
        t = np.asarray(temperature, dtype=float)
        result = np.full(t.shape, self.beta0, dtype=float)
        if self.tau_h is not None:
            result += self.beta_h * np.maximum(0.0, self.tau_h - t)
        if self.tau_c is not None:
            result += self.beta_c * np.maximum(0.0, t - self.tau_c)
        return result


def design_matrix(temperature: np.ndarray, tau_h: Optional[float], tau_c: Optional[float]) -> np.ndarray:
    columns = [np.ones_like(temperature)]
    if tau_h is not None:
        columns.append(np.maximum(0.0, tau_h - temperature))
    if tau_c is not None:
        columns.append(np.maximum(0.0, temperature - tau_c))
    return np.column_stack(columns)


def fit_fixed(energy: np.ndarray, temperature: np.ndarray, tau_h: Optional[float],
              tau_c: Optional[float]) -> tuple[np.ndarray, float]:
    """
    Coefficients minimizing SSE for fixed change points, slopes >= 0.

    Returns:
        (coefficients [b0, bh?, bc?], sse)
    """
    x = design_matrix(temperature, tau_h, tau_c)
    slopes = x.shape[1] - 1
    best_coef, best_sse = None, math.inf
    # With at most two bounded slopes, enumerating which of them are pinned at
    # zero and keeping the best feasible unconstrained fit is exact
    for pinned in itertools.product((False, True), repeat=slopes):
        free = [0] + [i + 1 for i, p in enumerate(pinned) if not p]
        sub, *_ = np.linalg.lstsq(x[:, free], energy, rcond=None)
        if np.any(sub[1:] < 0):
            continue
        coef = np.zeros(x.shape[1])
        coef[free] = sub
        residual = energy - x @ coef
        sse = float(residual @ residual)
        if not any(pinned):
            return coef, sse
        if sse < best_sse - 1e-12 or best_coef is None:
            best_coef, best_sse = coef, sse
    return best_coef, best_sse


def temperature_grid(temperature: np.ndarray, step: float = GRID_STEP) -> np.ndarray:
    low = math.ceil(float(temperature.min()) / step) * step
    high = math.floor(float(temperature.max()) / step) * step
    if high < low:
        return np.empty(0)
    return np.arange(low, high + step / 2, step)


def _scores(sse: float, sst: float, n: int, p: int) -> tuple[float, float]:
    if sst <= 0:
        r2 = 1.0 if sse <= 1e-12 else 0.0
    else:
        r2 = 1.0 - sse / sst
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - p) if n > p else r2
    return r2, adj


def _model(variant: str, coef: np.ndarray, tau_h, tau_c, sse: float, sst: float, n: int) -> ChangePointModel:
    p = PARAMETERS[variant]
    r2, adj = _scores(sse, sst, n, p)
    coef = list(coef)
    beta0 = float(coef.pop(0))
    beta_h = float(coef.pop(0)) if tau_h is not None else 0.0
    beta_c = float(coef.pop(0)) if tau_c is not None else 0.0
    return ChangePointModel(
        variant=variant, beta0=beta0, beta_h=beta_h, tau_h=tau_h, beta_c=beta_c, tau_c=tau_c,
        n=n, sse=sse, rmse=math.sqrt(sse / (n - p)) if n > p else 0.0, r2=r2, adj_r2=adj,
    )


def _hinge_ok(column: np.ndarray) -> bool:
    return int(np.count_nonzero(column)) >= 2


def fit_baseline(energy, temperature, min_days: int = MIN_FIT_DAYS, step: float = GRID_STEP) -> ChangePointModel:
    """
    Fit the best change-point variant to paired daily values.

    Args:
        energy: kWh per day (usable days only)
        temperature: mean °C per day, same order
        min_days: Minimum usable day pairs
        step: Change-point grid step (°C)

    Raises:
        InsufficientDataError: fewer than min_days pairs
    """
    e = np.asarray(energy, dtype=float)
    t = np.asarray(temperature, dtype=float)
    if e.shape != t.shape:
        raise InsufficientDataError("Energy and temperature series differ in length",
                                    details={"energy": len(e), "temperature": len(t)})
    n = len(e)
    if n < min_days:
        raise InsufficientDataError(f"{n} usable days, at least {min_days} needed",
                                    details={"days": n, "min_days": min_days})

    sst = float(((e - e.mean()) ** 2).sum())
    best = _model("baseload", np.array([e.mean()]), None, None, sst, sst, n)

    if len(np.unique(t)) < 2:
        logger.info("Degenerate temperature range; baseload-only model")
        return best

    grid = temperature_grid(t, step)
    candidates: dict[str, ChangePointModel] = {}

    for tau in grid:
        tau = float(tau)
        if _hinge_ok(np.maximum(0.0, tau - t)):
            coef, sse = fit_fixed(e, t, tau, None)
            model = _model("heating", coef, tau, None, sse, sst, n)
            if "heating" not in candidates or model.sse < candidates["heating"].sse:
                candidates["heating"] = model
        if _hinge_ok(np.maximum(0.0, t - tau)):
            coef, sse = fit_fixed(e, t, None, tau)
            model = _model("cooling", coef, None, tau, sse, sst, n)
            if "cooling" not in candidates or model.sse < candidates["cooling"].sse:
                candidates["cooling"] = model

    for i, tau_h in enumerate(grid):
        if not _hinge_ok(np.maximum(0.0, tau_h - t)):
            continue
        for tau_c in grid[i:]:
            if not _hinge_ok(np.maximum(0.0, t - tau_c)):
                continue
            coef, sse = fit_fixed(e, t, float(tau_h), float(tau_c))
            model = _model("heating+cooling", coef, float(tau_h), float(tau_c), sse, sst, n)
            if "heating+cooling" not in candidates or model.sse < candidates["heating+cooling"].sse:
                candidates["heating+cooling"] = model

    for variant in ("heating", "cooling", "heating+cooling"):
        model = candidates.get(variant)
        if model is not None and model.adj_r2 > best.adj_r2 + 1e-9:
            best = model

    logger.info(f"Baseline fit: {best.variant}, n={n}, adj R2={best.adj_r2:.4f}, RMSE={best.rmse:.3f}")
    return best

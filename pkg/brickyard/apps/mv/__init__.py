"""
Reference application: whole-facility measurement and verification.

Public API surface:
  - discover_metering, select_meter_point, resolve_expression
  - compute_net_consumption, mean_temperature
  - fit_baseline, ChangePointModel
  - estimate_savings, MvResult
  - MvConfig, bind_mv, run_mv, mv_package (registered as "mv.option_c")
"""

from .app import DISCOVERY_QUERY, ENTRYPOINT, OUTPUT_STREAM, Adjustment, MvConfig, bind_mv, mv_package, run_mv
from .baseline import MIN_FIT_DAYS, ChangePointModel, design_matrix, fit_baseline, fit_fixed
from .consumption import DAY, SeriesBucket, compute_net_consumption, mean_temperature
from .metering import MeterExpression, MeterTerm, MeteringDiscovery, PointChoice, discover_metering
from .points import classify_point, resolve_expression, select_meter_point
from .savings import MvResult, estimate_savings, interval_half_width

__all__ = [
    "DAY",
    "DISCOVERY_QUERY",
    "ENTRYPOINT",
    "MIN_FIT_DAYS",
    "OUTPUT_STREAM",
    "Adjustment",
    "ChangePointModel",
    "MeterExpression",
    "MeterTerm",
    "MeteringDiscovery",
    "MvConfig",
    "MvResult",
    "PointChoice",
    "SeriesBucket",
    "bind_mv",
    "classify_point",
    "compute_net_consumption",
    "design_matrix",
    "discover_metering",
    "estimate_savings",
    "fit_baseline",
    "fit_fixed",
    "interval_half_width",
    "mean_temperature",
    "mv_package",
    "resolve_expression",
    "run_mv",
    "select_meter_point",
]

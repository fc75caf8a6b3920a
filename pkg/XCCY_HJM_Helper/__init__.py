"""
XCCY HJM Helper Package
Cross-currency multiple-curve HJM simulation with collateral-aware pricing,
abstract index forwards and martingale diagnostics.
"""

from .config import Config, ExcelStyling
from .exceptions import (
    XccyHjmError, ExponentialMomentUnbounded, EmptyGrid, ReversedInterval, GridExhausted,
    MissingState, ZeroTotalWeight, BeforePeriodStart, ScheduleOffGrid, UncollateralizedUnsupported,
    DegenerateSensitivity, AdmissibilityViolation, SimulationError, ConfigSchemaError,
    VerificationFailure, ExportError,
)
from .driver import (
    Characteristics, DriverSpec, GaussianJumps, IncrementSampler, PiecewiseLoading, TwoPointJumps,
    girsanov_transform, local_exponent, local_exponent_gradient, simulate_increments,
)
from .measures import MeasureId, Estimate, DensityProcess, density_process, expectation_under
from .curves import InitialCurve, VolatilitySpec, ForwardSurface, hjm_drift, evolve_curve
from .basis import BasisSpec, BasisSurface, basis_drift, spread_bond, foreign_coll_bond
from .fx import FxSpec, fx_evolve, foreign_curve_driver, quanto_drift_correction
from .indices import (
    IndexSchedule, IndexSpec, SpreadFamilySpec, SpreadVolatility, simple_forward_collateral_rate,
    forward_index_spread, forward_index_value, spread_explicit, spot_rate_examples,
)
from .pricing import (
    Payment, CashflowStream, FallbackSpec, LegSpec, SwapSpec, ZcbRequest, SpotRateRequest,
    price_full_collateral, price_zcb, price_ccs, price_mtmccs, fair_spread, fallback_leg,
    asymmetric_collateral_price, price_book,
)
from .engine import (
    SimulationConfig, SimResult, CheckSpec, CheckResult, run_simulation, martingale_report,
    gaussian_oracle,
)
from .market import CurrencySpec, CommoditySpec, MarketModel, Scenario, load_scenario, parse_scenario
from .exporter import ExcelExporter, ReportTables
from .cli import cmd_simulate, cmd_price, cmd_verify, main

__version__ = "1.0.0"
__author__ = "Felix Markas Salve"

__all__ = [
    "Config",
    "ExcelStyling",
    "XccyHjmError",
    "ExponentialMomentUnbounded",
    "EmptyGrid",
    "ReversedInterval",
    "GridExhausted",
    "MissingState",
    "ZeroTotalWeight",
    "BeforePeriodStart",
    "ScheduleOffGrid",
    "UncollateralizedUnsupported",
    "DegenerateSensitivity",
    "AdmissibilityViolation",
    "SimulationError",
    "ConfigSchemaError",
    "VerificationFailure",
    "ExportError",
    "Characteristics",
    "DriverSpec",
    "GaussianJumps",
    "IncrementSampler",
    "PiecewiseLoading",
    "TwoPointJumps",
    "girsanov_transform",
    "local_exponent",
    "local_exponent_gradient",
    "simulate_increments",
    "MeasureId",
    "Estimate",
    "DensityProcess",
    "density_process",
    "expectation_under",
    "InitialCurve",
    "VolatilitySpec",
    "ForwardSurface",
    "hjm_drift",
    "evolve_curve",
    "BasisSpec",
    "BasisSurface",
    "basis_drift",
    "spread_bond",
    "foreign_coll_bond",
    "FxSpec",
    "fx_evolve",
    "foreign_curve_driver",
    "quanto_drift_correction",
    "IndexSchedule",
    "IndexSpec",
    "SpreadFamilySpec",
    "SpreadVolatility",
    "simple_forward_collateral_rate",
    "forward_index_spread",
    "forward_index_value",
    "spread_explicit",
    "spot_rate_examples",
    "Payment",
    "CashflowStream",
    "FallbackSpec",
    "LegSpec",
    "SwapSpec",
    "ZcbRequest",
    "SpotRateRequest",
    "price_full_collateral",
    "price_zcb",
    "price_ccs",
    "price_mtmccs",
    "fair_spread",
    "fallback_leg",
    "asymmetric_collateral_price",
    "price_book",
    "SimulationConfig",
    "SimResult",
    "CheckSpec",
    "CheckResult",
    "run_simulation",
    "martingale_report",
    "gaussian_oracle",
    "CurrencySpec",
    "CommoditySpec",
    "MarketModel",
    "Scenario",
    "load_scenario",
    "parse_scenario",
    "ExcelExporter",
    "ReportTables",
    "cmd_simulate",
    "cmd_price",
    "cmd_verify",
    "main",
]

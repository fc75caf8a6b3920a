"""
Configuration classes for XCCY HJM Helper package.
"""

from dataclasses import dataclass, field
from typing import Dict, Tuple
from openpyxl.styles import PatternFill, Font, Alignment, Border, Side


@dataclass(frozen=True)
class Config:
    """Configuration constants for the cross-currency HJM engine."""
    DEFAULT_DT: float = 1.0 / 96.0
    DEFAULT_CHUNK_SIZE: int = 5000
    DEFAULT_PATHS: int = 10000
    DEFAULT_SEED: int = 20240617
    SCHEMES: Tuple[str, ...] = ("euler",)
    GRID_TOLERANCE: float = 1e-10

    # RNG streams per path: 0 is the Brownian stream, jump component j uses 1 + j
    BROWNIAN_STREAM: int = 0
    JUMP_STREAM_OFFSET: int = 1
    NESTED_STREAM_TAG: int = 7919

    MAX_TILTED_INTENSITY: float = 1e6
    MAX_EXPONENT: float = 700.0

    Z_THRESHOLD: float = 3.0
    Z_THRESHOLD_JUMPS: float = 4.0
    VARIANCE_TOLERANCE: float = 0.05
    EXACT_TOLERANCE: float = 1e-12
    DEFAULT_OUTER_PATHS: int = 32
    DEFAULT_INNER_PATHS: int = 256

    EXIT_OK: int = 0
    EXIT_CONFIG_ERROR: int = 2
    EXIT_VERIFICATION_FAILED: int = 3
    EXIT_RUNTIME_ERROR: int = 4
    THREADS_ENV_VAR: str = "XCCY_HJM_THREADS"

    CSV_FLOAT_FORMAT: str = "%.17g"
    SIMULATION_CSV: str = "simulation.csv"
    PRICING_CSV: str = "pricing.csv"
    VERIFY_CSV: str = "verification.csv"
    MANIFEST_FILE: str = "manifest.json"
    EXCEL_REPORT: str = "report.xlsx"
    PRICING_COLUMNS: Tuple[str, ...] = (
        "instrument_id", "t", "value", "std_error", "leg_k0", "leg_k", "fair_spread"
    )
    SIMULATION_COLUMNS: Tuple[str, ...] = ("path_id", "t", "quantity", "value")
    VERIFY_COLUMNS: Tuple[str, ...] = ("name", "t", "target", "estimate", "std_error", "z", "passed")

    INDEX_KINDS: Tuple[str, ...] = (
        "backward_compounded", "forward_looking", "ibor", "commodity", "abstract"
    )
    ZCB_CASES: Tuple[str, ...] = ("k0k0", "k0k3", "k2k0", "k2k2_dual", "unsecured")
    SWAP_KINDS: Tuple[str, ...] = ("ccs", "mtmccs")
    FALLBACK_KINDS: Tuple[str, ...] = ("ameribor_like", "isda_compounded")
    SPOT_RATE_KINDS: Tuple[str, ...] = (
        "backward_compounded", "forward_looking", "in_arrears_forward",
        "forward_looking_forward", "ibor", "commodity",
    )
    SIMULATION_QUANTITIES: Tuple[str, ...] = ("short_rate", "account", "fx", "density")
    VOL_FAMILIES: Tuple[str, ...] = ("constant", "exponential", "piecewise")
    JUMP_FAMILIES: Tuple[str, ...] = ("two_point", "gaussian")
    CHECK_KINDS: Tuple[str, ...] = (
        "discounted_bond", "foreign_collateral_bond", "spread_bond_forward",
        "fx_martingale", "index_spread", "index_forward", "expectation_hypothesis",
        "forward_density", "claim_martingale", "zcb_duality", "gaussian_oracle",
        "nested_collateral_rate", "asymmetric_collateral",
    )

    # Known keys per scenario block; anything else is rejected
    TOP_LEVEL_KEYS: Tuple[str, ...] = ("market", "simulation", "instruments", "checks", "output")
    MARKET_KEYS: Tuple[str, ...] = (
        "base_currency", "currencies", "driver", "basis", "fx", "indices", "commodities"
    )
    CURRENCY_KEYS: Tuple[str, ...] = ("initial_curve", "volatility", "unsecured_spread")
    CURVE_KEYS: Tuple[str, ...] = ("pillars", "values", "flat")
    VOLATILITY_KEYS: Tuple[str, ...] = (
        "family", "loading", "mean_reversion", "breakpoints", "levels"
    )
    DRIVER_KEYS: Tuple[str, ...] = ("dim", "drift", "diffusion", "jumps", "regimes")
    REGIME_KEYS: Tuple[str, ...] = ("start", "drift", "diffusion", "jumps")
    JUMP_KEYS: Tuple[str, ...] = (
        "family", "intensity", "loading", "up", "down", "p_up", "mean", "std"
    )
    BASIS_KEYS: Tuple[str, ...] = ("base", "collateral", "initial_curve", "volatility")
    FX_KEYS: Tuple[str, ...] = ("currency", "spot", "volatility")
    FX_VOL_KEYS: Tuple[str, ...] = ("loading", "breakpoints", "loadings")
    INDEX_KEYS: Tuple[str, ...] = (
        "name", "kind", "currency", "collateral", "fixing_adjustment",
        "payment_adjustment", "initial_curve", "volatility", "commodity",
    )
    COMMODITY_KEYS: Tuple[str, ...] = ("name", "currency", "spot", "loading", "convenience_yield")
    SIMULATION_KEYS: Tuple[str, ...] = (
        "horizon", "dt", "paths", "seed", "scheme", "chunk_size", "antithetic",
        "observation_times", "threads",
    )
    INSTRUMENT_KEYS: Tuple[str, ...] = ("zcbs", "swaps", "spot_rates")
    ZCB_KEYS: Tuple[str, ...] = ("id", "case", "currency", "collateral", "maturity", "t")
    SWAP_KEYS: Tuple[str, ...] = (
        "id", "kind", "direction", "collateral", "start", "end", "t",
        "domestic", "foreign", "fair_spread_leg",
    )
    LEG_KEYS: Tuple[str, ...] = (
        "currency", "notional", "period", "fixing_adjustment", "index",
        "spread", "reset", "fallback",
    )
    FALLBACK_KEYS: Tuple[str, ...] = ("kind", "credit_spread")
    SPOT_RATE_KEYS: Tuple[str, ...] = ("id", "kind", "currency", "collateral", "start", "end", "t", "index")
    CHECK_KEYS: Tuple[str, ...] = (
        "kind", "currency", "collateral", "maturity", "index", "fixing", "times", "case",
        "outer_paths", "inner_paths", "borrow_rate", "lend_rate", "funding_rate", "payments",
    )
    OUTPUT_KEYS: Tuple[str, ...] = ("directory", "excel_report", "simulation_quantities")


@dataclass(frozen=True)
class ExcelStyling:
    """Excel styling configuration."""
    header_fill: PatternFill = PatternFill(start_color="BDD7EE", end_color="BDD7EE", fill_type="solid")
    header_font: Font = Font(bold=True)
    total_fill: PatternFill = PatternFill(start_color="BDD7EE", end_color="BDD7EE", fill_type="solid")
    total_font: Font = Font(bold=True)
    failed_fill: PatternFill = PatternFill(start_color="F8CBAD", end_color="F8CBAD", fill_type="solid")
    center_alignment: Alignment = Alignment(horizontal="center", vertical="center")
    thin_border: Border = Border(
        left=Side(style="thin"), right=Side(style="thin"),
        top=Side(style="thin"), bottom=Side(style="thin")
    )
    number_format: str = "0.000000000"
    max_column_width: int = 50
    column_padding: int = 3
    sheet_titles: Dict[str, str] = field(default_factory=lambda: {
        "summary": "Summary", "checks": "Checks", "prices": "Prices",
    })

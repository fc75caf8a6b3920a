"""
Market model and scenario documents for XCCY HJM Helper package.

A scenario is one JSON document with the blocks market, simulation,
instruments, checks and output. Every block accepts a fixed set of keys;
anything else is rejected with its dotted path and the closest known key.
"""

import hashlib
import json
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Set, Tuple, Union

import numpy as np
import pycountry
from rapidfuzz import fuzz, process

from .basis import BasisSpec, combined_basis
from .config import Config
from .curves import InitialCurve, VolatilitySpec
from .driver import Characteristics, DriverSpec, GaussianJumps, PiecewiseLoading, TwoPointJumps
from .engine import CheckSpec, SimulationConfig, check_dates, default_threads
from .exceptions import AdmissibilityViolation, ConfigSchemaError, ExponentialMomentUnbounded
from .fx import FxSpec, check_fx_admissibility, foreign_curve_driver
from .indices import IndexSchedule, IndexSpec, SpreadFamilySpec, SpreadVolatility
from .measures import MeasureId
from .pricing import FallbackSpec, LegSpec, SpotRateRequest, SwapSpec, ZcbRequest

logger = logging.getLogger(__name__)

_CONFIG = Config()

_REQUIRED = object()


@dataclass(frozen=True, eq=False)
class CurrencySpec:
    """Collateral curve of one currency and its deterministic unsecured spread q_bar."""
    code: str
    initial_curve: InitialCurve
    volatility: VolatilitySpec
    unsecured_spread: InitialCurve = field(default_factory=lambda: InitialCurve.flat(0.0))


@dataclass(frozen=True, eq=False)
class CommoditySpec:
    """Spot S_t = S_0 exp(int (r^c - y) ds + int sigma dX - int Psi(sigma) ds) in `currency`."""
    name: str
    currency: str
    spot: float
    loading: np.ndarray
    convenience_yield: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "loading", np.atleast_1d(np.asarray(self.loading, dtype=float)))
        if not self.spot > 0:
            raise ValueError(f"Commodity spot must be > 0, got {self.spot}")


@dataclass(eq=False)
class MarketModel:
    """
    Every model input: currencies, the base-measure driver, basis pairs, FX pairs,
    indices and commodities.

    `fx` is keyed by the foreign currency, `basis` by (base, collateral).
    """
    base_currency: str
    currencies: Dict[str, CurrencySpec]
    driver: DriverSpec
    basis: Dict[Tuple[str, str], BasisSpec] = field(default_factory=dict)
    fx: Dict[str, FxSpec] = field(default_factory=dict)
    indices: Dict[str, IndexSpec] = field(default_factory=dict)
    commodities: Dict[str, CommoditySpec] = field(default_factory=dict)
    source_hash: str = ""
    _drivers: Dict[str, DriverSpec] = field(default_factory=dict, init=False, repr=False)
    _defaulted: Set[Tuple[str, str]] = field(default_factory=set, init=False, repr=False)

    def __post_init__(self):
        if self.base_currency not in self.currencies:
            raise ValueError(f"Base currency {self.base_currency} has no curve")
        for ccy in self.currencies:
            if ccy != self.base_currency and ccy not in self.fx:
                raise ValueError(f"Currency {ccy} has no FX rate against {self.base_currency}")
        for ccy, fxspec in self.fx.items():
            if fxspec.base != self.base_currency or fxspec.currency != ccy:
                raise ValueError(f"FX entry {ccy} must quote {self.base_currency} per {ccy}")
        for (pair_base, pair_coll), spec in self.basis.items():
            if pair_base != self.base_currency or pair_coll == pair_base or spec.key != (pair_base, pair_coll):
                raise ValueError(
                    f"Basis {pair_base}/{pair_coll} must be stored against the base currency {self.base_currency}"
                )

    def currency_driver(self, currency: str) -> DriverSpec:
        """Characteristics of X under Q^currency."""
        if currency not in self._drivers:
            if currency == self.base_currency:
                self._drivers[currency] = self.driver
            else:
                try:
                    self._drivers[currency] = foreign_curve_driver(self.driver, self.fx[currency])
                except ExponentialMomentUnbounded as e:
                    raise AdmissibilityViolation(f"Driver under Q^{currency}: {str(e)}")
        return self._drivers[currency]

    def basis_terms(self, base: str, collateral: str) -> List[Tuple[Tuple[str, str], float]]:
        """
        Stored pairs and signs summing to q^{base,collateral} = q^{k0,collateral} - q^{k0,base}.

        Only pairs against the base currency k0 are stored; a needed pair that is
        not configured counts as zero, with one warning.
        """
        if base == collateral:
            return []
        terms = []
        for ccy, sign in ((collateral, 1.0), (base, -1.0)):
            if ccy == self.base_currency:
                continue
            key = (self.base_currency, ccy)
            if key in self.basis:
                terms.append((key, sign))
            elif key not in self._defaulted:
                logger.warning(f"Basis {key[0]}/{key[1]} not configured, taken as identically zero")
                self._defaulted.add(key)
        return terms

    def basis_spec(self, base: str, collateral: str) -> BasisSpec:
        """Spec of q^{base,collateral}: stored, the negated reverse pair, or a cross pair of two stored ones."""
        terms = self.basis_terms(base, collateral)
        if len(terms) == 1 and terms[0] == ((base, collateral), 1.0):
            return self.basis[(base, collateral)]
        if not terms:
            return BasisSpec(base, collateral, InitialCurve.flat(0.0), VolatilitySpec.zero(self.driver.dim))
        parts = [self.basis[key] if sign > 0 else self.basis[key].negated() for key, sign in terms]
        return combined_basis(base, collateral, parts)

    @property
    def spread_families(self) -> List[SpreadFamilySpec]:
        families: Dict[Tuple[float, float, str, str], SpreadFamilySpec] = {}
        for index in self.indices.values():
            if index.spread_family is not None:
                families.setdefault(index.spread_family.key, index.spread_family)
        return list(families.values())

    def spread_volatility(self, family: SpreadFamilySpec) -> SpreadVolatility:
        return SpreadVolatility(
            family.volatility,
            self.currencies[family.base].volatility,
            self.basis_spec(family.base, family.collateral).volatility,
            family.delta_f,
            family.delta_p,
        )

    def family_for(self, index: str) -> SpreadFamilySpec:
        spec = self.indices[index]
        if spec.spread_family is None:
            raise ValueError(f"Index {index!r} of kind {spec.kind} has no spread family")
        return spec.spread_family

    def index_schedule(self, index: str, fixing: float) -> IndexSchedule:
        spec = self.indices[index]
        if spec.spread_family is not None:
            return spec.spread_family.schedule(fixing)
        return IndexSchedule(fixing, spec.fixing_adjustment, spec.payment_adjustment)

    @property
    def dates(self) -> Tuple[float, ...]:
        """Regime breaks and curve pillars; the time grid passes through all of them."""
        points = set(self.driver.starts)
        for fxspec in self.fx.values():
            points |= set(fxspec.volatility.starts)
        curves = [spec.initial_curve for spec in self.currencies.values()]
        curves += [spec.initial_curve for spec in self.basis.values()]
        curves += [family.initial_curve for family in self.spread_families]
        for curve in curves:
            points |= set(curve.pillars.tolist())
        return tuple(sorted(p for p in points if p >= 0.0))

    def check_admissibility(self) -> None:
        """Loading dimensions match the driver and every FX exponential is a true martingale."""
        dim = self.driver.dim
        vols = [(f"volatility of {ccy}", spec.volatility) for ccy, spec in self.currencies.items()]
        vols += [(f"basis {b}/{c}", spec.volatility) for (b, c), spec in self.basis.items()]
        vols += [(family.label, family.volatility) for family in self.spread_families]
        for label, vol in vols:
            if vol.dim != dim:
                raise AdmissibilityViolation(f"{label}: loading dimension {vol.dim}, driver has {dim}")
        for name, spec in self.commodities.items():
            if spec.loading.size != dim:
                raise AdmissibilityViolation(f"Commodity {name}: loading dimension {spec.loading.size}, driver has {dim}")
        for fxspec in self.fx.values():
            check_fx_admissibility(fxspec, self.driver)
        for ccy in self.currencies:
            self.currency_driver(ccy)
        logger.debug(f"Market admissible: {len(self.currencies)} currencies, driver dimension {dim}")


@dataclass(frozen=True)
class OutputSpec:
    directory: Path
    excel_report: bool = True
    simulation_quantities: Tuple[str, ...] = _CONFIG.SIMULATION_QUANTITIES


@dataclass(frozen=True, eq=False)
class Scenario:
    """A parsed scenario document."""
    market: MarketModel
    simulation: SimulationConfig
    zcbs: Tuple[ZcbRequest, ...] = ()
    swaps: Tuple[SwapSpec, ...] = ()
    spot_rates: Tuple[SpotRateRequest, ...] = ()
    checks: Tuple[CheckSpec, ...] = ()
    output: OutputSpec = OutputSpec(Path("."))

    def with_overrides(self, seed: Optional[int] = None, paths: Optional[int] = None,
                       out_dir: Optional[Union[str, Path]] = None, threads: Optional[int] = None,
                       drift_bias: Optional[float] = None) -> "Scenario":
        """Copy with command-line overrides applied; None keeps the document value."""
        changes = {
            key: value for key, value in
            (("seed", seed), ("paths", paths), ("threads", threads), ("drift_bias", drift_bias))
            if value is not None
        }
        try:
            simulation = replace(self.simulation, **changes)
        except ValueError as e:
            raise ConfigSchemaError(str(e), "simulation")
        output = self.output if out_dir is None else replace(self.output, directory=Path(out_dir))
        return replace(self, simulation=simulation, output=output)


def _suggest(key: str, known: Sequence[str]) -> str:
    match = process.extractOne(key, list(known), scorer=fuzz.ratio, score_cutoff=60)
    return f" (did you mean {match[0]!r}?)" if match else ""


@contextmanager
def _at(path: str) -> Iterator[None]:
    """Report model validation errors against the field they come from."""
    try:
        yield
    except ConfigSchemaError:
        raise
    except (ValueError, TypeError) as e:
        raise ConfigSchemaError(str(e), path)


class _Block:
    """Typed reader over one JSON object of the document."""

    def __init__(self, data: Any, path: str, known: Sequence[str]):
        if not isinstance(data, dict):
            raise ConfigSchemaError(f"expected an object, got {type(data).__name__}", path)
        for key in data:
            if key not in known:
                raise ConfigSchemaError(f"unknown key{_suggest(key, known)}", self._join(path, key))
        self.data = data
        self.path = path

    @staticmethod
    def _join(path: str, key: Union[str, int]) -> str:
        if isinstance(key, int):
            return f"{path}[{key}]"
        return f"{path}.{key}" if path else key

    def where(self, key: str) -> str:
        return self._join(self.path, key)

    def has(self, key: str) -> bool:
        return key in self.data

    def raw(self, key: str, default: Any = _REQUIRED) -> Any:
        if key not in self.data:
            if default is _REQUIRED:
                raise ConfigSchemaError("missing required key", self.where(key))
            return default
        return self.data[key]

    def number(self, key: str, default: Any = _REQUIRED) -> float:
        value = self.raw(key, default)
        if value is default and default is not _REQUIRED:
            return value
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
            raise ConfigSchemaError(f"expected a finite number, got {value!r}", self.where(key))
        return float(value)

    def integer(self, key: str, default: Any = _REQUIRED) -> int:
        value = self.raw(key, default)
        if value is default and default is not _REQUIRED:
            return value
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigSchemaError(f"expected an integer, got {value!r}", self.where(key))
        return value

    def boolean(self, key: str, default: Any = _REQUIRED) -> bool:
        value = self.raw(key, default)
        if not isinstance(value, bool):
            raise ConfigSchemaError(f"expected true or false, got {value!r}", self.where(key))
        return value

    def text(self, key: str, default: Any = _REQUIRED) -> Optional[str]:
        value = self.raw(key, default)
        if value is default and default is not _REQUIRED:
            return value
        if not isinstance(value, str) or not value:
            raise ConfigSchemaError(f"expected a non-empty string, got {value!r}", self.where(key))
        return value

    def choice(self, key: str, options: Sequence[str], default: Any = _REQUIRED) -> str:
        value = self.text(key, default)
        if value not in options:
            raise ConfigSchemaError(f"unknown value {value!r}{_suggest(str(value), options)}", self.where(key))
        return value

    def choices(self, key: str, options: Sequence[str]) -> Tuple[str, ...]:
        value = self.raw(key)
        if not isinstance(value, list) or not value:
            raise ConfigSchemaError("expected a non-empty list", self.where(key))
        for i, item in enumerate(value):
            if item not in options:
                raise ConfigSchemaError(f"unknown value {item!r}{_suggest(str(item), options)}",
                                        self._join(self.where(key), i))
        return tuple(value)

    def vector(self, key: str, default: Any = _REQUIRED) -> np.ndarray:
        value = self.raw(key, default)
        if value is default and default is not _REQUIRED:
            return value
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = [value]
        if not isinstance(value, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ConfigSchemaError(f"expected a list of numbers, got {value!r}", self.where(key))
        array = np.asarray(value, dtype=float)
        if not np.all(np.isfinite(array)):
            raise ConfigSchemaError("expected finite numbers", self.where(key))
        return array

    def matrix(self, key: str, default: Any = _REQUIRED) -> np.ndarray:
        value = self.raw(key, default)
        if value is default and default is not _REQUIRED:
            return value
        if not isinstance(value, list) or not all(isinstance(row, list) for row in value):
            raise ConfigSchemaError("expected a list of rows", self.where(key))
        rows = [_Block({"row": row}, self.where(key), ("row",)).vector("row") for row in value]
        if len({row.size for row in rows}) > 1:
            raise ConfigSchemaError("rows have different lengths", self.where(key))
        return np.asarray(rows, dtype=float)

    def child(self, key: str, known: Sequence[str], default: Any = _REQUIRED) -> Optional["_Block"]:
        value = self.raw(key, default)
        if value is default and default is not _REQUIRED:
            return value
        return _Block(value, self.where(key), known)

    def children(self, key: str, known: Sequence[str]) -> List["_Block"]:
        value = self.raw(key, [])
        if not isinstance(value, list):
            raise ConfigSchemaError("expected a list", self.where(key))
        return [_Block(item, self._join(self.where(key), i), known) for i, item in enumerate(value)]

    def mapping(self, key: str, known: Sequence[str]) -> Dict[str, "_Block"]:
        value = self.raw(key)
        if not isinstance(value, dict) or not value:
            raise ConfigSchemaError("expected a non-empty object", self.where(key))
        return {name: _Block(item, f"{self.where(key)}.{name}", known) for name, item in value.items()}


def validate_currency(code: Any, path: str) -> str:
    """ISO 4217 alphabetic code."""
    if not isinstance(code, str) or len(code) != 3 or not code.isupper():
        raise ConfigSchemaError(f"expected a three-letter upper-case currency code, got {code!r}", path)
    if pycountry.currencies.get(alpha_3=code) is None:
        raise ConfigSchemaError(f"{code!r} is not an ISO 4217 currency code", path)
    return code


def _reference(value: str, known: Sequence[str], what: str, path: str) -> str:
    if value not in known:
        raise ConfigSchemaError(f"unknown {what} {value!r}{_suggest(value, known)}", path)
    return value


def _parse_curve(block: _Block, key: str, default: Any = _REQUIRED) -> InitialCurve:
    value = block.raw(key, default)
    if value is default and default is not _REQUIRED:
        return value
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return InitialCurve.flat(block.number(key))
    curve = block.child(key, _CONFIG.CURVE_KEYS)
    with _at(curve.path):
        if curve.has("flat"):
            if curve.has("pillars") or curve.has("values"):
                raise ConfigSchemaError("give either flat or pillars and values", curve.path)
            return InitialCurve.flat(curve.number("flat"))
        return InitialCurve(curve.vector("pillars"), curve.vector("values"))


def _parse_volatility(block: _Block, key: str, dim: int) -> VolatilitySpec:
    if not block.has(key):
        return VolatilitySpec.zero(dim)
    vol = block.child(key, _CONFIG.VOLATILITY_KEYS)
    with _at(vol.path):
        family = vol.choice("family", _CONFIG.VOL_FAMILIES, "constant")
        loading = vol.vector("loading", np.zeros(dim))
        if loading.size != dim:
            raise ConfigSchemaError(f"loading has {loading.size} entries, driver dimension is {dim}", vol.where("loading"))
        return VolatilitySpec(
            family,
            loading,
            vol.number("mean_reversion", 0.0),
            tuple(vol.vector("breakpoints", np.zeros(0))),
            tuple(vol.vector("levels", np.zeros(0))),
        )


def _parse_jump(block: _Block, dim: int):
    family = block.choice("family", _CONFIG.JUMP_FAMILIES)
    loading = block.vector("loading")
    if loading.size != dim:
        raise ConfigSchemaError(f"loading has {loading.size} entries, driver dimension is {dim}", block.where("loading"))
    with _at(block.path):
        if family == "two_point":
            for key in ("mean", "std"):
                if block.has(key):
                    raise ConfigSchemaError("not used by two_point jumps", block.where(key))
            return TwoPointJumps(block.number("intensity"), loading, block.number("up"),
                                 block.number("down"), block.number("p_up", 0.5))
        for key in ("up", "down", "p_up"):
            if block.has(key):
                raise ConfigSchemaError("not used by gaussian jumps", block.where(key))
        return GaussianJumps(block.number("intensity"), loading, block.number("mean", 0.0), block.number("std"))


def _parse_characteristics(block: _Block, dim: int) -> Characteristics:
    drift = block.vector("drift", np.zeros(dim))
    diffusion = block.matrix("diffusion", np.eye(dim))
    jumps = tuple(_parse_jump(jump, dim) for jump in block.children("jumps", _CONFIG.JUMP_KEYS))
    if drift.size != dim:
        raise ConfigSchemaError(f"drift has {drift.size} entries, driver dimension is {dim}", block.where("drift"))
    with _at(block.path):
        return Characteristics(drift, diffusion, jumps)


def _parse_driver(block: _Block, base: str) -> DriverSpec:
    dim = block.integer("dim", 1)
    if dim < 1:
        raise ConfigSchemaError(f"expected a dimension >= 1, got {dim}", block.where("dim"))
    if block.has("regimes"):
        for key in ("drift", "diffusion", "jumps"):
            if block.has(key):
                raise ConfigSchemaError("give characteristics either at top level or per regime", block.where(key))
        regimes = block.children("regimes", _CONFIG.REGIME_KEYS)
        if not regimes:
            raise ConfigSchemaError("expected at least one regime", block.where("regimes"))
        starts = [regime.number("start", 0.0) for regime in regimes]
        characteristics = [_parse_characteristics(regime, dim) for regime in regimes]
    else:
        starts, characteristics = [0.0], [_parse_characteristics(block, dim)]
    with _at(block.path):
        return DriverSpec(MeasureId.spot(base), tuple(characteristics), tuple(starts))


def _parse_fx(block: _Block, base: str, dim: int, currencies: Sequence[str]) -> FxSpec:
    currency = _reference(block.text("currency"), currencies, "currency", block.where("currency"))
    if currency == base:
        raise ConfigSchemaError(f"FX pairs quote {base} against another currency", block.where("currency"))
    loading = PiecewiseLoading.constant(np.zeros(dim))
    if block.has("volatility"):
        vol = block.child("volatility", _CONFIG.FX_VOL_KEYS)
        with _at(vol.path):
            if vol.has("loadings"):
                if vol.has("loading"):
                    raise ConfigSchemaError("give either loading or breakpoints and loadings", vol.path)
                starts = (0.0,) + tuple(vol.vector("breakpoints", np.zeros(0)))
                loading = PiecewiseLoading(starts, vol.matrix("loadings"))
            else:
                if vol.has("breakpoints"):
                    raise ConfigSchemaError("breakpoints need loadings", vol.where("breakpoints"))
                loading = PiecewiseLoading.constant(vol.vector("loading"))
        if loading.dim != dim:
            raise ConfigSchemaError(f"loading has {loading.dim} entries, driver dimension is {dim}", vol.path)
    with _at(block.path):
        return FxSpec(base, currency, block.number("spot"), loading)


def _parse_index(block: _Block, dim: int, currencies: Sequence[str], commodities: Sequence[str]) -> IndexSpec:
    name = block.text("name")
    kind = block.choice("kind", _CONFIG.INDEX_KINDS)
    currency = _reference(block.text("currency"), currencies, "currency", block.where("currency"))
    collateral = _reference(block.text("collateral", currency), currencies, "currency", block.where("collateral"))
    fixing_adjustment = block.number("fixing_adjustment", 0.0)
    payment_adjustment = block.number("payment_adjustment", 0.0)
    family = None
    if kind == "abstract":
        with _at(block.path):
            family = SpreadFamilySpec(
                fixing_adjustment, payment_adjustment, currency, collateral,
                _parse_curve(block, "initial_curve", InitialCurve.flat(0.0)),
                _parse_volatility(block, "volatility", dim),
            )
    else:
        for key in ("initial_curve", "volatility"):
            if block.has(key):
                raise ConfigSchemaError(f"only abstract indices carry a spread curve, not {kind}", block.where(key))
    commodity = None
    if kind == "commodity":
        commodity = _reference(block.text("commodity"), commodities, "commodity", block.where("commodity"))
    elif block.has("commodity"):
        raise ConfigSchemaError(f"only commodity indices reference a commodity, not {kind}", block.where("commodity"))
    with _at(block.path):
        return IndexSpec(name, kind, currency, collateral, fixing_adjustment, payment_adjustment, family, commodity)


def parse_market(block: _Block) -> MarketModel:
    """Build the market model from the `market` block."""
    base = validate_currency(block.raw("base_currency"), block.where("base_currency"))
    driver = _parse_driver(block.child("driver", _CONFIG.DRIVER_KEYS), base)
    dim = driver.dim

    currencies: Dict[str, CurrencySpec] = {}
    for code, entry in block.mapping("currencies", _CONFIG.CURRENCY_KEYS).items():
        validate_currency(code, entry.path)
        with _at(entry.path):
            currencies[code] = CurrencySpec(
                code,
                _parse_curve(entry, "initial_curve"),
                _parse_volatility(entry, "volatility", dim),
                _parse_curve(entry, "unsecured_spread", InitialCurve.flat(0.0)),
            )
    if base not in currencies:
        raise ConfigSchemaError(f"base currency {base} has no entry in currencies", block.where("base_currency"))
    codes = list(currencies)

    fx: Dict[str, FxSpec] = {}
    for entry in block.children("fx", _CONFIG.FX_KEYS):
        spec = _parse_fx(entry, base, dim, codes)
        if spec.currency in fx:
            raise ConfigSchemaError(f"duplicate FX pair {spec.label}", entry.path)
        fx[spec.currency] = spec
    for code in codes:
        if code != base and code not in fx:
            raise ConfigSchemaError(f"currency {code} needs an FX entry against {base}", block.where("fx"))

    basis: Dict[Tuple[str, str], BasisSpec] = {}
    for entry in block.children("basis", _CONFIG.BASIS_KEYS):
        pair_base = _reference(entry.text("base"), codes, "currency", entry.where("base"))
        if pair_base != base:
            raise ConfigSchemaError(
                f"basis base must be the base currency {base}, got {pair_base}; reverse and cross pairs are derived",
                entry.where("base"),
            )
        pair_coll = _reference(entry.text("collateral"), codes, "currency", entry.where("collateral"))
        if pair_base == pair_coll:
            raise ConfigSchemaError("a currency has no basis against itself", entry.where("collateral"))
        if (pair_base, pair_coll) in basis:
            raise ConfigSchemaError(f"duplicate basis pair {pair_base}/{pair_coll}", entry.path)
        with _at(entry.path):
            basis[(pair_base, pair_coll)] = BasisSpec(
                pair_base, pair_coll, _parse_curve(entry, "initial_curve"),
                _parse_volatility(entry, "volatility", dim),
            )

    commodities: Dict[str, CommoditySpec] = {}
    for entry in block.children("commodities", _CONFIG.COMMODITY_KEYS):
        name = entry.text("name")
        if name in commodities:
            raise ConfigSchemaError(f"duplicate commodity {name!r}", entry.where("name"))
        loading = entry.vector("loading", np.zeros(dim))
        if loading.size != dim:
            raise ConfigSchemaError(f"loading has {loading.size} entries, driver dimension is {dim}", entry.where("loading"))
        with _at(entry.path):
            commodities[name] = CommoditySpec(
                name, _reference(entry.text("currency"), codes, "currency", entry.where("currency")),
                entry.number("spot"), loading, entry.number("convenience_yield", 0.0),
            )

    indices: Dict[str, IndexSpec] = {}
    for entry in block.children("indices", _CONFIG.INDEX_KEYS):
        spec = _parse_index(entry, dim, codes, list(commodities))
        if spec.name in indices:
            raise ConfigSchemaError(f"duplicate index {spec.name!r}", entry.where("name"))
        indices[spec.name] = spec

    source = json.dumps(block.data, sort_keys=True, separators=(",", ":"))
    with _at(block.path):
        market = MarketModel(base, currencies, driver, basis, fx, indices, commodities,
                             hashlib.sha256(source.encode("utf-8")).hexdigest())
    logger.info(
        f"Market: base {base}, {len(currencies)} currencies, {len(basis)} basis pair(s), "
        f"{len(indices)} index(es), driver dimension {dim}"
    )
    return market


def _parse_leg(block: _Block, market: MarketModel) -> LegSpec:
    codes = list(market.currencies)
    index = block.text("index", None)
    if index is not None:
        _reference(index, list(market.indices), "index", block.where("index"))
    fallback = None
    if block.has("fallback"):
        entry = block.child("fallback", _CONFIG.FALLBACK_KEYS)
        with _at(entry.path):
            fallback = FallbackSpec(entry.choice("kind", _CONFIG.FALLBACK_KINDS), entry.number("credit_spread", 0.0))
    with _at(block.path):
        return LegSpec(
            _reference(block.text("currency"), codes, "currency", block.where("currency")),
            block.number("notional", 1.0),
            block.number("period"),
            index,
            block.number("spread", 0.0),
            block.number("fixing_adjustment", 0.0),
            block.boolean("reset", False),
            fallback,
        )


def _swap_dates(swap: SwapSpec, market: MarketModel) -> Set[float]:
    dates = set(swap.dates())
    for leg in (swap.domestic, swap.foreign):
        if leg.index is None or market.indices[leg.index].spread_family is None:
            continue
        family = market.indices[leg.index].spread_family
        dates.add(family.delta_f)
        for start in leg.schedule(swap.start, swap.end)[:-1]:
            sched = family.schedule(float(start) + family.delta_f)
            dates |= {sched.fixing, sched.payment}
    return dates


def _parse_instruments(block: Optional[_Block], market: MarketModel
                       ) -> Tuple[Tuple[ZcbRequest, ...], Tuple[SwapSpec, ...], Tuple[SpotRateRequest, ...]]:
    if block is None:
        return (), (), ()
    codes = list(market.currencies)
    ids: Set[str] = set()

    def unique(entry: _Block) -> str:
        instrument_id = entry.text("id")
        if instrument_id in ids:
            raise ConfigSchemaError(f"duplicate instrument id {instrument_id!r}", entry.where("id"))
        ids.add(instrument_id)
        return instrument_id

    zcbs = []
    for entry in block.children("zcbs", _CONFIG.ZCB_KEYS):
        instrument_id = unique(entry)
        currency = _reference(entry.text("currency"), codes, "currency", entry.where("currency"))
        with _at(entry.path):
            zcbs.append(ZcbRequest(
                instrument_id, entry.choice("case", _CONFIG.ZCB_CASES), currency,
                _reference(entry.text("collateral", currency), codes, "currency", entry.where("collateral")),
                entry.number("maturity"), entry.number("t", 0.0),
            ))

    swaps = []
    for entry in block.children("swaps", _CONFIG.SWAP_KEYS):
        instrument_id = unique(entry)
        domestic = _parse_leg(entry.child("domestic", _CONFIG.LEG_KEYS), market)
        foreign = _parse_leg(entry.child("foreign", _CONFIG.LEG_KEYS), market)
        if domestic.currency != market.base_currency:
            raise ConfigSchemaError(f"domestic leg must be in {market.base_currency}", entry.where("domestic.currency"))
        with _at(entry.path):
            swap = SwapSpec(
                instrument_id, entry.choice("kind", _CONFIG.SWAP_KINDS, "ccs"), entry.integer("direction", 1),
                _reference(entry.text("collateral", market.base_currency), codes, "currency", entry.where("collateral")),
                entry.number("start"), entry.number("end"), entry.number("t", 0.0),
                domestic, foreign, entry.text("fair_spread_leg", None),
            )
            swap.domestic.schedule(swap.start, swap.end)
            swap.foreign.schedule(swap.start, swap.end)
        swaps.append(swap)

    spot_rates = []
    for entry in block.children("spot_rates", _CONFIG.SPOT_RATE_KEYS):
        instrument_id = unique(entry)
        currency = _reference(entry.text("currency"), codes, "currency", entry.where("currency"))
        index = entry.text("index", None)
        if index is not None:
            _reference(index, list(market.indices), "index", entry.where("index"))
        with _at(entry.path):
            spot_rates.append(SpotRateRequest(
                instrument_id, entry.choice("kind", _CONFIG.SPOT_RATE_KINDS), currency,
                _reference(entry.text("collateral", currency), codes, "currency", entry.where("collateral")),
                entry.number("start"), entry.number("end"), entry.number("t", 0.0), index,
            ))
    return tuple(zcbs), tuple(swaps), tuple(spot_rates)


def _parse_check(block: _Block, market: MarketModel) -> CheckSpec:
    codes = list(market.currencies)
    currency = block.text("currency", "")
    if currency:
        _reference(currency, codes, "currency", block.where("currency"))
    collateral = block.text("collateral", "")
    if collateral:
        _reference(collateral, codes, "currency", block.where("collateral"))
    index = block.text("index", "")
    if index:
        _reference(index, list(market.indices), "index", block.where("index"))
    payments = ()
    if block.has("payments"):
        rows = block.matrix("payments")
        if rows.ndim != 2 or rows.shape[1] != 2:
            raise ConfigSchemaError("expected [time, amount] pairs", block.where("payments"))
        payments = tuple((float(t), float(a)) for t, a in rows)
    with _at(block.path):
        return CheckSpec(
            block.choice("kind", _CONFIG.CHECK_KINDS), currency, collateral,
            block.number("maturity", 0.0), index, block.number("fixing", 0.0),
            tuple(block.vector("times", np.zeros(0))), block.text("case", ""),
            block.integer("outer_paths", _CONFIG.DEFAULT_OUTER_PATHS),
            block.integer("inner_paths", _CONFIG.DEFAULT_INNER_PATHS),
            block.number("borrow_rate", 0.0), block.number("lend_rate", 0.0),
            block.number("funding_rate", 0.0), payments,
        )


def parse_scenario(document: Any, origin: Optional[Path] = None) -> Scenario:
    """
    Validate a decoded scenario document and build the scenario.

    Observation times are the requested ones plus every date an instrument or
    check reads, 0 and the horizon.

    Args:
        document: Decoded JSON document
        origin: File the document came from; relative output directories resolve against it

    Returns:
        Scenario ready for the engine
    """
    root = _Block(document, "", _CONFIG.TOP_LEVEL_KEYS)
    market = parse_market(root.child("market", _CONFIG.MARKET_KEYS))
    zcbs, swaps, spot_rates = _parse_instruments(root.child("instruments", _CONFIG.INSTRUMENT_KEYS, None), market)
    checks = tuple(_parse_check(entry, market) for entry in root.children("checks", _CONFIG.CHECK_KEYS))

    dates: Set[float] = {0.0}
    for zcb in zcbs:
        dates |= {zcb.t, zcb.maturity}
    for i, swap in enumerate(swaps):
        with _at(f"instruments.swaps[{i}]"):
            dates |= _swap_dates(swap, market)
    for rate in spot_rates:
        dates |= {rate.t, rate.start, rate.end}
    for i, check in enumerate(checks):
        with _at(f"checks[{i}]"):
            dates |= set(check_dates(check, market))

    simulation = root.child("simulation", _CONFIG.SIMULATION_KEYS)
    horizon = simulation.number("horizon")
    latest = max(dates)
    if horizon < latest - _CONFIG.GRID_TOLERANCE:
        raise ConfigSchemaError(f"horizon {horizon:g} ends before the last instrument date {latest:g}",
                                simulation.where("horizon"))
    requested = tuple(simulation.vector("observation_times", np.zeros(0)))
    observation = sorted({float(t) for t in (*requested, *dates, horizon) if 0.0 <= t <= horizon})
    with _at(simulation.path):
        config = SimulationConfig(
            horizon=horizon,
            dt=simulation.number("dt", _CONFIG.DEFAULT_DT),
            paths=simulation.integer("paths", _CONFIG.DEFAULT_PATHS),
            seed=simulation.integer("seed", _CONFIG.DEFAULT_SEED),
            scheme=simulation.choice("scheme", _CONFIG.SCHEMES, "euler"),
            chunk_size=simulation.integer("chunk_size", _CONFIG.DEFAULT_CHUNK_SIZE),
            antithetic=simulation.boolean("antithetic", False),
            observation_times=tuple(observation),
            threads=simulation.integer("threads", default_threads()),
        )

    output = root.child("output", _CONFIG.OUTPUT_KEYS, None)
    directory = Path(".")
    excel_report = True
    quantities = _CONFIG.SIMULATION_QUANTITIES
    if output is not None:
        directory = Path(output.text("directory", "."))
        excel_report = output.boolean("excel_report", True)
        if output.has("simulation_quantities"):
            quantities = output.choices("simulation_quantities", _CONFIG.SIMULATION_QUANTITIES)
    if origin is not None and not directory.is_absolute():
        directory = origin.parent / directory

    logger.info(
        f"Scenario: {len(zcbs)} ZCB(s), {len(swaps)} swap(s), {len(spot_rates)} spot rate(s), "
        f"{len(checks)} check(s), {len(observation)} observation times"
    )
    return Scenario(market, config, zcbs, swaps, spot_rates, checks, OutputSpec(directory, excel_report, quantities))


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Read and parse a scenario file; decoding errors carry line and column."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigSchemaError(f"cannot read scenario file: {str(e)}", str(path))
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigSchemaError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}", str(path))
    logger.info(f"Loaded scenario {path}")
    return parse_scenario(document, path)

"""
Command-line front door: simulate, price and verify a scenario document.

Exit codes: 0 success, 2 scenario error, 3 verification failure, 4 runtime error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from .config import Config, ExcelStyling
from .engine import SimResult, default_checks, martingale_report, run_simulation
from .exceptions import ConfigSchemaError, VerificationFailure, XccyHjmError
from .exporter import (
    ExcelExporter, ReportTables, write_manifest, write_pricing_csv, write_simulation_csv,
    write_verification_csv,
)
from .market import Scenario, load_scenario
from .pricing import price_book

logger = logging.getLogger(__name__)

_CONFIG = Config()


def _prepare(config_path: Path, overrides: Dict[str, Any]) -> Scenario:
    return load_scenario(config_path).with_overrides(**overrides)


def _simulate(scenario: Scenario) -> SimResult:
    return run_simulation(scenario.market, scenario.simulation)


def _save_excel(scenario: Scenario, tables: Dict[str, List[List[Any]]]) -> List[Path]:
    if not scenario.output.excel_report:
        return []
    return [ExcelExporter(ExcelStyling()).save(tables, scenario.output.directory)]


def cmd_simulate(config_path: Path, **overrides) -> List[Path]:
    """Simulate the scenario and export the path table with its manifest."""
    scenario = _prepare(config_path, overrides)
    result = _simulate(scenario)
    out = scenario.output.directory
    files = [write_simulation_csv(result, out, scenario.output.simulation_quantities)]
    files += _save_excel(scenario, {"summary": ReportTables.summary("simulate", config_path, result)})
    files.append(write_manifest(out, "simulate", config_path, result, files))
    return files


def cmd_price(config_path: Path, **overrides) -> List[Path]:
    """Price every instrument of the scenario."""
    scenario = _prepare(config_path, overrides)
    if not (scenario.zcbs or scenario.swaps or scenario.spot_rates):
        raise ConfigSchemaError("no instruments to price", "instruments")
    result = _simulate(scenario)
    rows = price_book(result, scenario.zcbs, scenario.swaps, scenario.spot_rates, scenario.simulation.threads)
    out = scenario.output.directory
    files = [write_pricing_csv(rows, out)]
    files += _save_excel(scenario, {
        "summary": ReportTables.summary("price", config_path, result, prices=rows),
        "prices": ReportTables.prices(rows),
    })
    files.append(write_manifest(out, "price", config_path, result, files, {"instruments": len(rows)}))
    return files


def cmd_verify(config_path: Path, **overrides) -> List[Path]:
    """
    Run the martingale and oracle checks and write the report.

    Raises:
        VerificationFailure: At least one check row fails; the report is written first
    """
    scenario = _prepare(config_path, overrides)
    result = _simulate(scenario)
    checks = scenario.checks or tuple(default_checks(scenario.market, scenario.simulation.horizon))
    rows = martingale_report(result, checks)
    failed = [row for row in rows if not row.passed]

    out = scenario.output.directory
    files = [write_verification_csv(rows, out)]
    files += _save_excel(scenario, {
        "summary": ReportTables.summary("verify", config_path, result, checks=rows),
        "checks": ReportTables.checks(rows),
    })
    files.append(write_manifest(out, "verify", config_path, result, files,
                                {"checks": len(rows), "failed": len(failed)}))
    if failed:
        worst = max(failed, key=lambda row: abs(row.z))
        raise VerificationFailure(
            f"{len(failed)} of {len(rows)} check rows failed, worst {worst.name} at t={worst.t:g} (z={worst.z:.3g})"
        )
    return files


_COMMANDS: Dict[str, Callable[..., List[Path]]] = {
    "simulate": cmd_simulate,
    "price": cmd_price,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xccy-hjm",
        description="Cross-currency multiple-curve HJM simulation, pricing and verification",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS), help="What to run")
    parser.add_argument("config", type=Path, help="Scenario JSON document")
    parser.add_argument("--seed", type=int, help="Override simulation.seed")
    parser.add_argument("--paths", type=int, help="Override simulation.paths")
    parser.add_argument("--out-dir", type=Path, help="Override output.directory")
    parser.add_argument(
        "--threads", type=int,
        help=f"Override simulation.threads (default from {_CONFIG.THREADS_ENV_VAR}, else 1)",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Log progress")
    # Shifts every curve drift; verify must then fail
    parser.add_argument("--corrupt-drift", type=float, help=argparse.SUPPRESS)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    overrides = {
        "seed": args.seed, "paths": args.paths, "out_dir": args.out_dir,
        "threads": args.threads, "drift_bias": args.corrupt_drift,
    }
    try:
        files = _COMMANDS[args.command](args.config, **overrides)
    except ConfigSchemaError as e:
        print(f"scenario error: {e}", file=sys.stderr)
        return _CONFIG.EXIT_CONFIG_ERROR
    except VerificationFailure as e:
        print(f"verification failed: {e}", file=sys.stderr)
        return _CONFIG.EXIT_VERIFICATION_FAILED
    except XccyHjmError as e:
        print(f"error: {e}", file=sys.stderr)
        return _CONFIG.EXIT_RUNTIME_ERROR
    except Exception as e:
        logger.exception(f"Unexpected failure in {args.command}")
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return _CONFIG.EXIT_RUNTIME_ERROR
    logger.info(f"{args.command} wrote {len(files)} file(s)")
    return _CONFIG.EXIT_OK

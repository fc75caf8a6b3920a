"""
CSV, manifest and Excel export for XCCY HJM Helper package.

CSV files use a fixed column order, '.' decimals, '\\n' line ends and 17
significant digits, so reruns with the same scenario and seed are byte-identical.
"""

import io
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from openpyxl import Workbook
from openpyxl.worksheet.worksheet import Worksheet

from .config import Config, ExcelStyling
from .engine import CheckResult, SimResult
from .exceptions import ExportError
from .pricing import PricingRow

logger = logging.getLogger(__name__)

_CONFIG = Config()


def _write_frame(frame: pd.DataFrame, path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=_CONFIG.CSV_FLOAT_FORMAT, lineterminator="\n", na_rep="")
    except OSError as e:
        logger.error(f"Could not write {path}: {str(e)}")
        raise ExportError(f"Could not write {path}: {str(e)}")
    logger.info(f"Wrote {len(frame)} row(s) to {path}")
    return path


def write_simulation_csv(result: SimResult, directory: Path,
                         quantities: Sequence[str] = _CONFIG.SIMULATION_QUANTITIES) -> Path:
    """Long table (path_id, t, quantity, value) of the requested quantities."""
    return _write_frame(result.path_table(quantities), Path(directory) / _CONFIG.SIMULATION_CSV)


def pricing_frame(rows: Sequence[PricingRow]) -> pd.DataFrame:
    return pd.DataFrame([tuple(row) for row in rows], columns=list(_CONFIG.PRICING_COLUMNS))


def write_pricing_csv(rows: Sequence[PricingRow], directory: Path) -> Path:
    return _write_frame(pricing_frame(rows), Path(directory) / _CONFIG.PRICING_CSV)


def verification_frame(rows: Sequence[CheckResult]) -> pd.DataFrame:
    frame = pd.DataFrame([tuple(row) for row in rows], columns=list(_CONFIG.VERIFY_COLUMNS))
    frame["passed"] = frame["passed"].map({True: "true", False: "false"})
    return frame


def write_verification_csv(rows: Sequence[CheckResult], directory: Path) -> Path:
    return _write_frame(verification_frame(rows), Path(directory) / _CONFIG.VERIFY_CSV)


def write_manifest(directory: Path, command: str, scenario: Path, result: SimResult,
                   files: Sequence[Path], extra: Optional[Dict[str, Any]] = None) -> Path:
    """
    Provenance of one run: command, scenario, config hash, seed, grid and outputs.

    Holds no timestamps or absolute paths so identical runs write identical manifests.
    """
    from . import __version__

    config = result.config
    manifest = {
        "command": command,
        "scenario": Path(scenario).name,
        "version": __version__,
        "config_hash": result.config_hash,
        "market_hash": result.market.source_hash,
        "seed": config.seed,
        "paths": config.paths,
        "horizon": config.horizon,
        "dt": config.dt,
        "antithetic": config.antithetic,
        "grid_steps": int(result.grid.size - 1),
        "observation_times": [float(t) for t in result.times],
        "files": sorted(Path(f).name for f in files),
    }
    if extra:
        manifest.update(extra)
    path = Path(directory) / _CONFIG.MANIFEST_FILE
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        logger.error(f"Could not write {path}: {str(e)}")
        raise ExportError(f"Could not write {path}: {str(e)}")
    logger.info(f"Wrote manifest {path}")
    return path


class ReportTables:
    """Builds the tables of the Excel report as lists of rows, header first."""

    @staticmethod
    def summary(command: str, scenario: Path, result: SimResult,
                checks: Sequence[CheckResult] = (), prices: Sequence[PricingRow] = ()) -> List[List[Any]]:
        config = result.config
        table = [
            ["Field", "Value"],
            ["Command", command],
            ["Scenario", Path(scenario).name],
            ["Config hash", result.config_hash],
            ["Base currency", result.base_currency],
            ["Seed", config.seed],
            ["Paths", config.paths],
            ["Horizon", config.horizon],
            ["Step", config.dt],
            ["Observation times", int(result.times.size)],
        ]
        if prices:
            table.append(["Pricing rows", len(prices)])
        if checks:
            passed = sum(row.passed for row in checks)
            table.append(["Checks passed", f"{passed} / {len(checks)}"])
        return table

    @staticmethod
    def checks(rows: Sequence[CheckResult]) -> List[List[Any]]:
        table: List[List[Any]] = [list(_CONFIG.VERIFY_COLUMNS)]
        for row in rows:
            table.append([row.name, row.t, row.target, row.estimate, row.std_error,
                          _finite_or_text(row.z), "PASS" if row.passed else "FAIL"])
        passed = sum(row.passed for row in rows)
        table.append(["Total", "", "", "", "", "", f"{passed}/{len(rows)}"])
        return table

    @staticmethod
    def prices(rows: Sequence[PricingRow]) -> List[List[Any]]:
        table: List[List[Any]] = [list(_CONFIG.PRICING_COLUMNS)]
        for row in rows:
            table.append([row.instrument_id] + [_finite_or_text(v) for v in tuple(row)[1:]])
        return table


def _finite_or_text(value: float) -> Any:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return ""
    if isinstance(value, float) and np.isinf(value):
        return "inf" if value > 0 else "-inf"
    return float(value)


class ExcelExporter:
    """Human-readable workbook next to the CSV files, one sheet per table."""

    def __init__(self, styling: ExcelStyling):
        self.styling = styling

    def create_excel_report(self, tables: Dict[str, List[List[Any]]]) -> bytes:
        """
        Build the workbook.

        Args:
            tables: Rows per sheet key (summary, checks, prices), header row first

        Returns:
            The workbook as bytes
        """
        wb = Workbook()
        wb.remove(wb.active)
        for key, rows in tables.items():
            ws = wb.create_sheet(self.styling.sheet_titles.get(key, key.title()))
            self._add_table_to_worksheet(ws, rows, 1, with_total=(key == "checks"))
            self._auto_fit_columns(ws)
            ws.freeze_panes = "A2"

        output = io.BytesIO()
        wb.save(output)
        return output.getvalue()

    def save(self, tables: Dict[str, List[List[Any]]], directory: Path) -> Path:
        path = Path(directory) / _CONFIG.EXCEL_REPORT
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(self.create_excel_report(tables))
        except OSError as e:
            logger.error(f"Could not write {path}: {str(e)}")
            raise ExportError(f"Could not write {path}: {str(e)}")
        logger.info(f"Wrote Excel report {path}")
        return path

    def _add_table_to_worksheet(self, ws: Worksheet, rows: List[List[Any]], start_row: int,
                                with_total: bool = False) -> int:
        current_row = start_row
        for row_idx, row_data in enumerate(rows):
            failed = row_data[-1] == "FAIL"
            for col_idx, value in enumerate(row_data, 1):
                cell = ws.cell(row=current_row, column=col_idx, value=value)
                is_total = with_total and row_idx == len(rows) - 1
                self._apply_cell_formatting(cell, row_idx, is_total, failed)
            current_row += 1
        return current_row

    def _apply_cell_formatting(self, cell, row_idx: int, is_total: bool, failed: bool) -> None:
        cell.alignment = self.styling.center_alignment
        cell.border = self.styling.thin_border
        if row_idx == 0:
            cell.fill = self.styling.header_fill
            cell.font = self.styling.header_font
        elif is_total:
            cell.fill = self.styling.total_fill
            cell.font = self.styling.total_font
        elif failed:
            cell.fill = self.styling.failed_fill
        if row_idx > 0 and isinstance(cell.value, float):
            cell.number_format = self.styling.number_format

    def _auto_fit_columns(self, ws: Worksheet) -> None:
        """Width of the longest value plus padding, capped."""
        for column in ws.columns:
            column_letter = column[0].column_letter
            max_length = max(len(str(cell.value)) if cell.value is not None else 0 for cell in column)
            width = min(max_length + self.styling.column_padding, self.styling.max_column_width)
            ws.column_dimensions[column_letter].width = width

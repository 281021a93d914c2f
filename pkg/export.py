"""
CSV and Excel export of result tables.
"""

import logging
import math
import sys
from typing import Any, Dict, Optional

import pandas as pd

from errors import OutputError
from formatting import format_cell, format_real

logger = logging.getLogger(__name__)


def _format_meta(value: Any) -> str:
    if isinstance(value, float):
        return format_real(value)
    if isinstance(value, (list, tuple)):
        return ";".join(_format_meta(v) for v in value)
    return format_cell(value)


def render_csv(table: pd.DataFrame, metadata: Optional[Dict[str, Any]] = None) -> str:
    """
    Render a table as CSV text.

    `#` metadata lines come first, then the header and rows. Reals carry 17
    significant digits, +inf is written as `inf`, lines end with LF.
    """
    lines = [f"# {key}={_format_meta(value)}\n" for key, value in (metadata or {}).items()]
    formatted = table.astype(object).map(format_cell) if len(table) else table
    body = formatted.to_csv(index=False, lineterminator='\n')
    return "".join(lines) + body


def emit_csv(table: pd.DataFrame, path: Optional[str],
             metadata: Optional[Dict[str, Any]] = None) -> None:
    """Write a table as UTF-8 CSV to `path`, or to stdout when path is None or '-'."""
    text = render_csv(table, metadata)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    try:
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
    except OSError as e:
        raise OutputError(f"Error writing {path}: {e}")
    logger.info("wrote %d rows to %s", len(table), path)


def _excel_value(value: Any) -> Any:
    if isinstance(value, float) and (math.isinf(value) or math.isnan(value)):
        return format_real(value)
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


def export_workbook(sheets: Dict[str, pd.DataFrame], parameters: Dict[str, Any], path: str) -> None:
    """Export result tables to an Excel workbook with a leading Inputs sheet."""
    from openpyxl import Workbook
    from openpyxl.styles import Font
    from openpyxl.utils.dataframe import dataframe_to_rows

    wb = Workbook()

    # Remove default sheet
    wb.remove(wb.active)

    ws_inputs = wb.create_sheet("Inputs")
    ws_inputs.append(["Parameter", "Value"])
    for key, value in parameters.items():
        if isinstance(value, (list, tuple, dict)):
            value = str(value)
        ws_inputs.append([key, _excel_value(value)])
    for cell in ws_inputs[1]:
        cell.font = Font(bold=True)

    for name, table in sheets.items():
        ws = wb.create_sheet(name[:31])
        for r in dataframe_to_rows(table, index=False, header=True):
            ws.append([_excel_value(v) for v in r])
        for cell in ws[1]:
            cell.font = Font(bold=True)

    try:
        wb.save(path)
    except OSError as e:
        raise OutputError(f"Error writing workbook {path}: {e}")
    logger.info("wrote workbook %s (%d sheets)", path, len(sheets) + 1)

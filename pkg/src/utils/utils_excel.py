# -*- coding: utf-8 -*-

from typing import Dict, Iterable, Optional

from openpyxl.styles import Alignment, Font, PatternFill
from openpyxl.utils import get_column_letter
from openpyxl.worksheet.worksheet import Worksheet

HEADER_COLOR = "CCE5FF"
SUMMARY_TAB_COLOR = "00B050"
MAX_COLUMN_WIDTH = 40


# ============================ EXCEL HELPERS ============================

def _header_columns(ws: Worksheet) -> Dict[str, int]:
    return {str(c.value).strip(): c.column for c in ws[1] if c.value is not None}


def apply_number_format(ws: Worksheet, headers: Iterable[str], number_format: str = "0.0000") -> None:
    """Apply 'number_format' to every data cell under the given header names."""
    columns = _header_columns(ws)
    for header in headers:
        col = columns.get(str(header).strip())
        if col is None:
            continue
        for row_idx in range(2, ws.max_row + 1):
            ws.cell(row=row_idx, column=col).number_format = number_format


def _fit_widths(ws: Worksheet, max_width: int) -> None:
    for col_idx in range(1, ws.max_column + 1):
        longest = 0
        for row_idx in range(1, ws.max_row + 1):
            value = ws.cell(row=row_idx, column=col_idx).value
            if value is None:
                continue
            # floats are rendered with the 4-decimal metric format at most
            text = f"{value:.4f}" if isinstance(value, float) else str(value)
            longest = max(longest, len(text.strip()))
        ws.column_dimensions[get_column_letter(col_idx)].width = min(longest + 2, max_width)


def style_report_workbook(writer, number_formats: Optional[Dict[str, Iterable[str]]] = None,
                          summary_prefix: str = "Summary", header_color: str = HEADER_COLOR,
                          max_width: int = MAX_COLUMN_WIDTH) -> None:
    """
    Style every sheet of an openpyxl-backed ExcelWriter as a report table:
    bold colored header, auto-filter, frozen first row, fitted column widths,
    number formats {format: headers}, and a colored tab on summary sheets.
    """
    header_fill = PatternFill(start_color=header_color, end_color=header_color, fill_type="solid")
    header_font = Font(bold=True, color="000000")
    header_alignment = Alignment(horizontal="left", vertical="center", wrap_text=True)

    for ws in writer.book.worksheets:
        if ws.max_row < 1 or ws.max_column < 1:
            continue
        for cell in ws[1]:
            cell.fill = header_fill
            cell.font = header_font
            cell.alignment = header_alignment

        ws.auto_filter.ref = f"A1:{get_column_letter(ws.max_column)}{ws.max_row}"
        ws.freeze_panes = "A2"

        for number_format, headers in (number_formats or {}).items():
            apply_number_format(ws, headers, number_format)
        _fit_widths(ws, max_width)

        if ws.title.startswith(summary_prefix):
            ws.sheet_properties.tabColor = SUMMARY_TAB_COLOR

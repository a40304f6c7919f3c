#!/usr/bin/env python3
"""
Trace Export Module
Writes simulation traces and sweep tables to CSV, JSON and Excel
"""

import csv
import json
import logging
import math
from io import StringIO
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

from openpyxl import Workbook
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
from openpyxl.utils import get_column_letter

from src.lfre import SimTrace
from src.settings import setting

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ['k', 'node', 'mode', 'estimate', 'error', 'rule']


def format_float(value: float, digits: Optional[int] = None) -> str:
    digits = setting('simulation', 'float_digits') if digits is None else digits
    return f"{value:.{digits}g}"


class CSVExporter:
    """Export traces and sweep rows to CSV"""

    @staticmethod
    def export_trace(trace: SimTrace, digits: Optional[int] = None) -> str:
        output = StringIO()
        writer = csv.writer(output, lineterminator='\n')
        writer.writerow(TRACE_COLUMNS)
        for row in trace.rows:
            writer.writerow([row.k, row.node, row.mode,
                             format_float(row.estimate, digits),
                             format_float(row.error, digits),
                             row.rule])
        return output.getvalue()

    @staticmethod
    def export_rows(columns: Sequence[str], rows: Iterable[Dict[str, Any]],
                    digits: Optional[int] = None) -> str:
        output = StringIO()
        writer = csv.writer(output, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            cells = []
            for col in columns:
                value = row.get(col, '')
                if isinstance(value, float):
                    value = format_float(value, digits)
                elif value is None:
                    value = ''
                cells.append(value)
            writer.writerow(cells)
        return output.getvalue()

    @staticmethod
    def save_to_file(csv_string: str, output_path: Union[str, Path]) -> str:
        output_path = Path(output_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        with open(output_path, 'w', newline='') as f:
            f.write(csv_string)
        return str(output_path)


def json_safe(value: Any) -> Any:
    """Non-finite floats become the strings "inf", "-inf" and "nan"; JSON has no literal for them"""
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    return value


def write_summary(summary: Dict[str, Any], path: Union[str, Path]) -> str:
    """Sorted keys and a trailing newline keep reruns byte-identical"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(json_safe(summary), f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")
    return str(path)


class ExcelExporter:
    """Workbook with a Summary sheet and one detail sheet"""

    def __init__(self):
        self.header_fill = PatternFill(start_color="366092", end_color="366092", fill_type="solid")
        self.header_font = Font(color="FFFFFF", bold=True, size=12)
        self.verdict_fills = {
            'CONVERGED': PatternFill(start_color="70AD47", end_color="70AD47", fill_type="solid"),
            'DIVERGED': PatternFill(start_color="C00000", end_color="C00000", fill_type="solid"),
            'MAXSTEPS': PatternFill(start_color="FFD966", end_color="FFD966", fill_type="solid"),
        }
        self.border = Border(
            left=Side(style='thin'),
            right=Side(style='thin'),
            top=Side(style='thin'),
            bottom=Side(style='thin')
        )

    def _header_row(self, ws, row: int, headers: Sequence[str]) -> None:
        for col_num, header in enumerate(headers, 1):
            cell = ws.cell(row=row, column=col_num, value=header)
            cell.fill = self.header_fill
            cell.font = self.header_font
            cell.border = self.border
            cell.alignment = Alignment(horizontal='center', vertical='center')

    def _create_summary_sheet(self, wb: Workbook, summary: Dict[str, Any], title: str) -> None:
        ws = wb.active
        ws.title = "Summary"

        ws['A1'] = title
        ws['A1'].font = Font(bold=True, size=16)

        row = 3
        for key in sorted(summary):
            value = summary[key]
            if isinstance(value, (dict, list)):
                value = json.dumps(value, sort_keys=True)
            ws[f'A{row}'] = key
            ws[f'A{row}'].font = Font(bold=True)
            ws[f'B{row}'] = value
            if key == 'verdict' and value in self.verdict_fills:
                ws[f'B{row}'].fill = self.verdict_fills[value]
            row += 1

        ws.column_dimensions['A'].width = 24
        ws.column_dimensions['B'].width = 60

    def _create_table_sheet(self, wb: Workbook, title: str, columns: Sequence[str],
                            rows: Iterable[Sequence[Any]]) -> None:
        ws = wb.create_sheet(title=title[:31])
        self._header_row(ws, 1, columns)
        for r, values in enumerate(rows, 2):
            for c, value in enumerate(values, 1):
                ws.cell(row=r, column=c, value=value).border = self.border
        for c in range(1, len(columns) + 1):
            ws.column_dimensions[get_column_letter(c)].width = 16
        ws.freeze_panes = 'A2'

    def export_run(self, summary: Dict[str, Any], trace: SimTrace, output_path: Union[str, Path]) -> str:
        wb = Workbook()
        self._create_summary_sheet(wb, summary, f"Scenario {summary.get('scenario', '')}".strip())
        rows = ((r.k, r.node, r.mode, r.estimate, r.error, r.rule) for r in trace.rows)
        self._create_table_sheet(wb, "Trace", TRACE_COLUMNS, rows)
        errors = ((k, err) for k, err in enumerate(trace.max_errors))
        self._create_table_sheet(wb, "Max Error", ['k', 'max_error'], errors)
        return self._save(wb, output_path)

    def export_sweep(self, aggregate: Dict[str, Any], columns: Sequence[str],
                     rows: List[Dict[str, Any]], output_path: Union[str, Path]) -> str:
        wb = Workbook()
        self._create_summary_sheet(wb, aggregate, "Sweep")
        self._create_table_sheet(wb, "Runs", columns, ([row.get(c) for c in columns] for row in rows))
        return self._save(wb, output_path)

    @staticmethod
    def _save(wb: Workbook, output_path: Union[str, Path]) -> str:
        output_path = Path(output_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        wb.save(output_path)
        logger.info("[EXPORT] workbook written to %s", output_path)
        return str(output_path)

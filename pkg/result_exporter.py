"""
Result Exporter for RM Toolbox
Writes experiment tables as CSV, a JSON summary, SVG plots and an optional
formatted Excel workbook.
"""

from dataclasses import dataclass, field
from datetime import datetime
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

# Excel formatting
from openpyxl import Workbook
from openpyxl.styles import Alignment, Border, Font, NamedStyle, PatternFill, Side
from openpyxl.utils import get_column_letter
from openpyxl.utils.dataframe import dataframe_to_rows
from openpyxl.worksheet.table import Table, TableStyleInfo

from config import __version__, get_config


class ExportFormat:
    """Export format constants."""
    CSV = 'csv'
    JSON = 'json'
    SVG = 'svg'
    XLSX = 'xlsx'


@dataclass
class PlotSeries:
    column: str
    label: str
    error_column: Optional[str] = None
    style: str = '-'
    axis: str = 'left'


@dataclass
class PlotSpec:
    """Line plot of table columns against one x column.

    A non-numeric x column is drawn at positions 0..n-1, its values becoming tick labels.
    """

    x: str
    series: List[PlotSeries]
    xlabel: str
    ylabel: str
    title: str = ''
    right_ylabel: Optional[str] = None
    hlines: List[float] = field(default_factory=lambda: [0.0])
    vlines: List[Tuple[float, str]] = field(default_factory=list)
    spans: List[Tuple[float, float, str]] = field(default_factory=list)


def _jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays and tuples into JSON-native values."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        value = float(value)
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


class ExcelResultExporter:
    """Workbook with a summary sheet and a styled result table."""

    def __init__(self, config=None):
        self.config = config or get_config()
        self.logger = logging.getLogger(__name__)
        self.styles = self._create_styles()

    def _create_styles(self) -> Dict[str, NamedStyle]:
        thin = Side(style='thin')
        styles = {}

        header_style = NamedStyle(name="header")
        header_style.font = Font(name='Calibri', size=11, bold=True, color='FFFFFF')
        header_style.fill = PatternFill(start_color='366092', end_color='366092', fill_type='solid')
        header_style.alignment = Alignment(horizontal='center', vertical='center', wrap_text=True)
        header_style.border = Border(left=thin, right=thin, top=thin, bottom=thin)
        styles['header'] = header_style

        data_style = NamedStyle(name="data")
        data_style.font = Font(name='Calibri', size=10)
        data_style.alignment = Alignment(horizontal='right', vertical='center')
        data_style.border = Border(left=thin, right=thin, top=thin, bottom=thin)
        styles['data'] = data_style

        title_style = NamedStyle(name="title")
        title_style.font = Font(name='Calibri', size=16, bold=True, color='366092')
        styles['title'] = title_style

        summary_style = NamedStyle(name="summary")
        summary_style.font = Font(name='Calibri', size=11, bold=True)
        summary_style.fill = PatternFill(start_color='E7E6E6', end_color='E7E6E6', fill_type='solid')
        styles['summary'] = summary_style

        return styles

    def create_workbook(self, experiment: str, table: pd.DataFrame, summary: Dict[str, Any],
                        output_path: Union[str, Path]) -> Path:
        wb = Workbook()
        if 'Sheet' in wb.sheetnames:
            wb.remove(wb['Sheet'])
        for style in self.styles.values():
            if style.name not in wb.named_styles:
                wb.add_named_style(style)

        self._create_summary_sheet(wb, experiment, summary)
        self._create_table_sheet(wb, experiment, table)

        wb.save(output_path)
        self.logger.info(f"Excel file created: {output_path}")
        return Path(output_path)

    def _create_summary_sheet(self, wb: Workbook, experiment: str, summary: Dict[str, Any]):
        ws = wb.create_sheet("Summary", 0)
        ws['A1'] = f"RM Toolbox: {experiment}"
        ws['A1'].style = 'title'
        ws['A3'] = f"Generated: {summary.get('created', '')}"
        ws['A4'] = f"Version: {summary.get('version', __version__)}"
        ws['A5'] = f"Seed: {summary.get('seed')}"

        row = 7
        for section, values in (('RESULTS', summary.get('results', {})),
                                 ('CONFIGURATION', summary.get('config', {}))):
            ws[f'A{row}'] = section
            ws[f'A{row}'].style = 'summary'
            row += 1
            for key, value in _flatten(values):
                ws[f'A{row}'] = key
                ws[f'B{row}'] = json.dumps(_jsonable(value)) if isinstance(value, (list, tuple, dict)) else _jsonable(value)
                row += 1
            row += 1

        self._autosize(ws)

    def _create_table_sheet(self, wb: Workbook, experiment: str, df: pd.DataFrame):
        ws = wb.create_sheet(title=self._clean_sheet_name(experiment))
        if df.empty:
            ws['A1'] = 'No data'
            return

        for r in dataframe_to_rows(df, index=False, header=True):
            ws.append([_jsonable(v) for v in r])

        ncols = len(df.columns)
        for col_num in range(1, ncols + 1):
            ws.cell(row=1, column=col_num).style = 'header'
        for row_num in range(2, len(df) + 2):
            for col_num in range(1, ncols + 1):
                ws.cell(row=row_num, column=col_num).style = 'data'

        table = Table(displayName="Results", ref=f"A1:{get_column_letter(ncols)}{len(df) + 1}")
        table.tableStyleInfo = TableStyleInfo(name="TableStyleMedium9", showFirstColumn=False,
                                              showLastColumn=False, showRowStripes=True,
                                              showColumnStripes=False)
        ws.add_table(table)
        ws.freeze_panes = 'A2'
        self._autosize(ws)

    @staticmethod
    def _autosize(ws):
        for column in ws.columns:
            width = max(len(str(cell.value)) if cell.value is not None else 0 for cell in column)
            ws.column_dimensions[get_column_letter(column[0].column)].width = min(width + 2, 50)

    @staticmethod
    def _clean_sheet_name(name: str) -> str:
        """Excel sheet names: no []:*?/\\ and at most 31 characters."""
        for char in '\\/?*[]:':
            name = name.replace(char, '_')
        return name[:31]


def _flatten(values: Dict[str, Any], prefix: str = '') -> List[Tuple[str, Any]]:
    items = []
    for key, value in values.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            items.extend(_flatten(value, f"{name}."))
        else:
            items.append((name, value))
    return items


class SvgPlotter:
    """Static matplotlib figures saved as SVG."""

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    def plot(self, table: pd.DataFrame, spec: PlotSpec, output_path: Union[str, Path]) -> Path:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        right = ax.twinx() if any(s.axis == 'right' for s in spec.series) else None
        labels = table[spec.x]
        categorical = not pd.api.types.is_numeric_dtype(labels)
        x = np.arange(len(table), dtype=float) if categorical else labels.to_numpy(dtype=float)
        try:
            for lo, hi, label in spec.spans:
                ax.axvspan(lo, hi, color='tab:green', alpha=0.12, label=label)
            for y in spec.hlines:
                ax.axhline(y, color='grey', linewidth=0.8)
            for position, label in spec.vlines:
                ax.axvline(position, color='grey', linestyle=':', linewidth=1.0, label=label)

            for series in spec.series:
                if series.column not in table.columns:
                    self.logger.debug(f"Skipping missing plot column {series.column}")
                    continue
                target = right if series.axis == 'right' else ax
                y = table[series.column].to_numpy(dtype=float)
                if series.error_column and series.error_column in table.columns:
                    target.errorbar(x, y, yerr=table[series.error_column].to_numpy(dtype=float),
                                    fmt=series.style, capsize=2, label=series.label)
                else:
                    target.plot(x, y, series.style, label=series.label)

            if categorical:
                ax.set_xticks(x)
                ax.set_xticklabels([str(v) for v in labels], rotation=30, ha="right")
            ax.set_xlabel(spec.xlabel)
            ax.set_ylabel(spec.ylabel)
            if right is not None:
                right.set_ylabel(spec.right_ylabel or '')
            if spec.title:
                ax.set_title(spec.title)

            handles, labels = ax.get_legend_handles_labels()
            if right is not None:
                more_handles, more_labels = right.get_legend_handles_labels()
                handles, labels = handles + more_handles, labels + more_labels
            if handles:
                ax.legend(handles, labels, fontsize=8, loc='best')

            fig.tight_layout()
            fig.savefig(output_path, format='svg', metadata={'Date': None})
        finally:
            plt.close(fig)

        self.logger.info(f"SVG plot created: {output_path}")
        return Path(output_path)


class ResultExporter:
    """Main exporter class supporting multiple formats."""

    def __init__(self, progress_callback=None, config=None):
        self.config = config or get_config()
        self.progress_callback = progress_callback
        self.logger = logging.getLogger(__name__)
        self.excel_exporter = ExcelResultExporter(self.config)
        self.plotter = SvgPlotter()

    def _update_progress(self, message: str, percentage: float):
        if self.progress_callback:
            self.progress_callback(message, percentage)

    def base_name(self, experiment: str) -> str:
        filename_format = self.config.get('export.filename_format', '{experiment}')
        return filename_format.format(experiment=experiment,
                                      timestamp=datetime.now().strftime('%Y%m%d_%H%M%S'))

    def build_summary(self, experiment: str, table: pd.DataFrame, results: Dict[str, Any],
                      seed: Optional[int]) -> Dict[str, Any]:
        return {
            'experiment': experiment,
            'config': self.config.snapshot(),
            'seed': seed,
            'version': __version__,
            'rows': len(table),
            'created': datetime.now().isoformat(timespec='seconds'),
            'results': _jsonable(results),
        }

    def export(self, experiment: str, table: pd.DataFrame, results: Optional[Dict[str, Any]] = None,
               plot: Optional[PlotSpec] = None, formats: Optional[Sequence[str]] = None,
               output_dir: Union[str, Path, None] = None, seed: Optional[int] = None) -> Dict[str, Path]:
        """Write ``table`` in every requested format; returns format -> path."""
        if table.empty:
            raise ValueError(f"Refusing to export an empty table for {experiment}")
        formats = list(formats or self.config.get('export.formats', ['csv']))
        unknown = [f for f in formats if f not in (ExportFormat.CSV, ExportFormat.JSON,
                                                   ExportFormat.SVG, ExportFormat.XLSX)]
        if unknown:
            raise ValueError(f"Unknown output formats: {unknown}")

        out = Path(output_dir) if output_dir is not None else self.config.get_output_dir()
        out.mkdir(parents=True, exist_ok=True)
        base = out / self.base_name(experiment)
        summary = self.build_summary(experiment, table, results or {}, seed)

        written = {}
        for i, format_type in enumerate(formats):
            self._update_progress(f"Writing {format_type.upper()} output...", 100.0 * i / len(formats))
            try:
                if format_type == ExportFormat.CSV:
                    written['csv'] = self._export_csv(table, base.with_name(base.name + '.csv'))
                elif format_type == ExportFormat.JSON:
                    written['json'] = self._export_json(summary, base.with_name(base.name + '_summary.json'))
                elif format_type == ExportFormat.SVG:
                    if plot is None:
                        self.logger.warning(f"No plot defined for {experiment}, skipping SVG")
                        continue
                    written['svg'] = self.plotter.plot(table, plot, base.with_name(base.name + '.svg'))
                elif format_type == ExportFormat.XLSX:
                    written['xlsx'] = self.excel_exporter.create_workbook(
                        experiment, table, summary, base.with_name(base.name + '.xlsx'))
            except OSError as e:
                self.logger.error(f"Error exporting {format_type}: {e}")
                raise

        self._update_progress("Export complete", 100)
        return written

    def _export_csv(self, table: pd.DataFrame, path: Path) -> Path:
        table.to_csv(path, index=False)
        self.logger.info(f"CSV file created: {path}")
        return path

    def _export_json(self, summary: Dict[str, Any], path: Path) -> Path:
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(_jsonable(summary), f, indent=2, ensure_ascii=False)
        self.logger.info(f"JSON file created: {path}")
        return path


def create_result_exporter(progress_callback=None, config=None) -> ResultExporter:
    """Factory function to create the multi-format exporter."""
    return ResultExporter(progress_callback, config)

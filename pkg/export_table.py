"""Write sweep rows as CSV or JSON lines.

Columns come out in the order KeyRatePoint.as_row() gives them: scan
coordinate, parameters, key rate, error rates, diagnostics, status. Floats
are printed with 12 significant digits so identical sweeps give
byte-identical files.
"""
import json
import math
import polars as pl
import util

FORMATS = ('csv', 'jsonl')
SIGNIFICANT_DIGITS = 12


def csv_value(value):
    if isinstance(value, float):
        return f'{value:.{SIGNIFICANT_DIGITS}g}'
    return str(value)


def json_value(value):
    if isinstance(value, float):
        if not math.isfinite(value):
            return None
        return float(f'{value:.{SIGNIFICANT_DIGITS}g}')
    return value


def emit_table(points, filename, fmt='csv'):
    """Write points to filename. Every successful row is re-validated first."""
    if len(points) == 0:
        raise util.InputError('No points to write')
    if fmt not in FORMATS:
        raise util.InputError(f'Unknown format {fmt!r}, expected one of {FORMATS}')
    for point in points:
        point.check()
    rows = [point.as_row() for point in points]
    columns = list(rows[0])
    assert all(list(row) == columns for row in rows), 'rows from different scans'

    if fmt == 'csv':
        df = pl.DataFrame({
            col: [csv_value(row[col]) for row in rows]
            for col in columns
        })
        with open(filename, 'wb') as fh:
            df.write_csv(fh)
    else:
        with open(filename, 'wt') as fh:
            for row in rows:
                json.dump({col: json_value(value) for col, value in row.items()}, fh)
                fh.write('\n')
    return filename

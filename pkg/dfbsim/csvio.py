"""
CSV emission and read-back for norm series, studies and snapshots.

Floats are written in their shortest round-trip decimal form (``repr``), so a
file read back with ``read_csv`` reproduces every recorded value bit for bit.
"""

import logging
import os
from typing import Protocol, Sequence, Union

import numpy as np

from .analysis import COLUMNS, NormRecord, NormSeries
from .core import StaggeredGrid
from .exceptions import CsvIOException

logger = logging.getLogger(__name__)

SERIES_HEADER = ("t", "l1", "l2", "linf", "mass", "u_l2", "div_residual", "lambda_num", "c_min", "c_max")


class Tabular(Protocol):
    """Anything that can render itself as a header plus string rows."""

    def to_table(self) -> tuple[Sequence[str], list[list[str]]]:
        ...


def format_float(value: float) -> str:
    """Shortest decimal that parses back to the same double."""
    return repr(float(value))


def _series_table(series: NormSeries) -> tuple[Sequence[str], list[list[str]]]:
    lam = series.lambda_num
    rows = []
    for record, rate in zip(series.records, lam):
        values = [getattr(record, name) for name in COLUMNS]
        # lambda_num sits between div_residual and c_min in the file.
        values = values[:7] + [rate] + values[7:]
        rows.append([format_float(v) for v in values])
    return SERIES_HEADER, rows


def _save(path: str, header: Sequence[str], rows: list[list[str]]) -> None:
    table = np.array(rows, dtype=str).reshape(len(rows), len(header))
    try:
        np.savetxt(path, table, fmt="%s", delimiter=",", header=",".join(header), comments="")
    except OSError as e:
        raise CsvIOException(path, f"cannot write: {e.strerror or e}") from e


def write_csv(data: Union[NormSeries, Tabular], path: str) -> None:
    """
    Write a norm series or a tabular report to CSV.

    A series produces one header line and one row per record with the columns
    ``t,l1,l2,linf,mass,u_l2,div_residual,lambda_num,c_min,c_max``.

    Args:
        data (NormSeries | Tabular): What to write.
        path (str): Destination file.

    Raises:
        CsvIOException: If the file cannot be written.
    """
    if isinstance(data, NormSeries):
        header, rows = _series_table(data)
    else:
        header, rows = data.to_table()
    _save(path, header, rows)
    logger.debug("wrote %d rows to %s", len(rows), path)


def read_csv(path: str) -> NormSeries:
    """
    Read a norm-series CSV written by write_csv.

    Raises:
        CsvIOException: If the file is missing, unreadable or has the wrong header.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as e:
        raise CsvIOException(path, f"cannot read: {e}") from e
    if tuple(header) != SERIES_HEADER:
        raise CsvIOException(path, f"unexpected header {header}")
    series = NormSeries()
    for row in data:
        values = list(row[:7]) + list(row[8:])
        series.append(NormRecord(*(float(v) for v in values)))
    return series


def write_snapshot(c: np.ndarray, grid: StaggeredGrid, path: str) -> None:
    """Write a concentration field as rows ``x,y,c`` at cell centers."""
    x, y = grid.cell_centers()
    rows = [[format_float(a), format_float(b), format_float(v)]
            for a, b, v in zip(x.ravel(), y.ravel(), np.asarray(c).ravel())]
    _save(path, ("x", "y", "c"), rows)


def ensure_directory(path: str) -> None:
    """Create an output directory if needed."""
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise CsvIOException(path, f"cannot create directory: {e.strerror or e}") from e

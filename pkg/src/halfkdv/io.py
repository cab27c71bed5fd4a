"""Deterministic CSV and summary emission."""

import csv
import math
from dataclasses import fields, is_dataclass
from pathlib import Path

import numpy as np

from .energy import RECORD_COLUMNS

ESTIMATE_COLUMNS = ("name", "lhs", "rhs", "margin", "passed", "worst_time")


def format_value(v):
    """Reals with 17 significant digits; other values via str."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".16e")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def emit_csv(rows, path, columns=None):
    """Write ``rows`` with a header line.

    ``rows`` are dataclass instances, mappings or sequences. ``columns``
    defaults to the dataclass field names of the first row, or to the
    energy-record columns when ``rows`` is empty.
    """
    rows = list(rows)
    if columns is None:
        if rows and is_dataclass(rows[0]):
            columns = [f.name for f in fields(rows[0])]
        elif rows and isinstance(rows[0], dict):
            columns = list(rows[0])
        else:
            columns = list(RECORD_COLUMNS)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            if is_dataclass(r):
                vals = [getattr(r, c) for c in columns]
            elif isinstance(r, dict):
                vals = [r[c] for c in columns]
            else:
                vals = list(r)
            w.writerow([format_value(v) for v in vals])
    return path


def emit_records(records, path):
    return emit_csv(records, path, RECORD_COLUMNS)


def emit_estimates(report, path):
    return emit_csv(report.entries, path, ESTIMATE_COLUMNS)


def write_summary(lines, path):
    """``lines`` is a sequence of (key, value) pairs, written as ``key: value``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = "".join(f"{k}: {format_value(v)}\n" for k, v in lines)
    path.write_text(text)
    return text

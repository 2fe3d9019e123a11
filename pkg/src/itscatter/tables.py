"""Deterministic CSV formatting shared by all writers."""

from __future__ import annotations

import csv
import math


def format_float(v) -> str:
    """Scientific notation with 12 significant digits; ``inf``/``nan`` verbatim."""
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return f"{v:.11e}"


def format_cell(v) -> str:
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(v).lower()
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return format_float(v)
    return str(v)


def write_rows(filename, header, rows, comments=()) -> None:
    with open(filename, "w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_cell(v) for v in row])

"""Deterministic text outputs: trace CSV, sweep results CSV, threshold
certificates.  Every file starts with a '#' metadata block (version, config
hash, dt, m, quadrature panels, ...) sufficient to reproduce the run; floats
are written with shortest round-trip repr so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import EnergyTable, evaluate_trace


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return ""
        return repr(x)
    if x is None:
        return ""
    return str(x)


def metadata_block(kind: str, meta: dict) -> str:
    lines = [f"# viscowave {__version__} {kind}"]
    lines += [f"# {key}: {fmt(value)}" for key, value in meta.items()]
    return "\n".join(lines)


def write_trace_csv(trace, path, table: EnergyTable = None) -> Path:
    if table is None:
        table = evaluate_trace(trace)
    meta = trace.metadata()
    if trace.blowup_time is not None:
        meta["blowup_time"] = trace.blowup_time
    cols = EnergyTable.CSV_COLUMNS
    lines = [metadata_block("trace", meta), ",".join(cols)]
    arrays = [getattr(table, c) for c in cols]
    for row in zip(*arrays):
        lines.append(",".join(fmt(v) for v in row))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_trace_csv(path):
    """Read back a trace CSV: returns (meta dict, column dict of arrays)."""
    meta, header, rows = {}, None, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if ":" in body:
                key, value = body.split(":", 1)
                meta[key.strip()] = value.strip()
            continue
        if header is None:
            header = line.split(",")
            continue
        if line:
            rows.append([float(v) if v else math.nan for v in line.split(",")])
    if header is None:
        raise ValueError(f"{path}: no CSV header found")
    data = np.array(rows) if rows else np.zeros((0, len(header)))
    return meta, {name: data[:, i] for i, name in enumerate(header)}


def write_results_csv(rows, columns, meta: dict, path) -> Path:
    lines = [metadata_block("sweep", meta), ",".join(columns)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def write_certificate(path, meta: dict, entries: list, inequality_rows: list) -> Path:
    """Key-value certificate: every constant, then the four solvability
    inequalities with both sides evaluated."""
    lines = [metadata_block("threshold-certificate", meta)]
    lines += [f"{key} = {fmt(value)}" for key, value in entries]
    for row in inequality_rows:
        verdict = "SATISFIED" if row.satisfied else "VIOLATED"
        op = ">" if row.name == "memory_sign" else "<"
        lines.append(
            f"inequality.{row.name} = lhs {fmt(row.lhs)} {op} rhs {fmt(row.rhs)} : {verdict}"
        )
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path

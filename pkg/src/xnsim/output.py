"""CSV and JSON emission with stable bytes.

Floats are written with repr(float), the shortest round-tripping form,
so identical simulation results serialize to identical bytes. All
writes go to a temp file in the target directory followed by
os.replace, so readers never observe a half-written file.

Per-run CSV: one row per (run, step), sorted by run_id then t, columns
in RUN_CSV_COLUMNS order. The price column is left blank when the
scenario has no price proxy.

Aggregate CSV: one row per step, a t column plus
``<variable>_{mean,std,min,max}`` for every state variable.
"""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError
from .kernel import Ensemble, aggregate

__all__ = [
    "RUN_CSV_COLUMNS",
    "atomic_write_text",
    "write_run_csv",
    "write_aggregate_csv",
    "write_json",
    "load_run_csv",
    "load_aggregate_csv",
]

RUN_CSV_COLUMNS = (
    "t",
    "run_id",
    "A",
    "outlay",
    "cumulative_outlay",
    "U",
    "beta",
    "I",
    "fee_accrued",
    "T",
    "price",
    "treasury_warning",
)

_FLOAT_COLUMNS = RUN_CSV_COLUMNS[2:]


def atomic_write_text(path, text: str) -> Path:
    """Write text to path via a same-directory temp file and os.replace."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = target.with_name(f".{target.name}.tmp{os.getpid()}")
    try:
        tmp.write_text(text)
        os.replace(tmp, target)
    finally:
        tmp.unlink(missing_ok=True)
    return target


def _fmt(value) -> str:
    return repr(float(value))


def write_run_csv(path, ensemble: Ensemble) -> Path:
    """Every run of an ensemble, one row per step."""
    has_price = "price" in ensemble.variables
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RUN_CSV_COLUMNS)
    for traj in sorted(ensemble.trajectories, key=lambda tr: tr.run_id):
        series = {name: traj.series(name) for name in traj.variables}
        for i in range(len(traj)):
            row = [str(traj.t0 + i), str(traj.run_id)]
            for name in _FLOAT_COLUMNS:
                if name == "price" and not has_price:
                    row.append("")
                else:
                    row.append(_fmt(series[name][i]))
            writer.writerow(row)
    return atomic_write_text(path, buf.getvalue())


def write_aggregate_csv(path, ensemble: Ensemble) -> Path:
    """Cross-run mean/std/min/max per step for every variable."""
    variables = ensemble.variables
    stats = {var: aggregate(ensemble, var) for var in variables}
    t0 = ensemble.trajectories[0].t0
    n = len(ensemble.trajectories[0])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["t"]
    for var in variables:
        header.extend(f"{var}_{stat}" for stat in ("mean", "std", "min", "max"))
    writer.writerow(header)
    for i in range(n):
        row = [str(t0 + i)]
        for var in variables:
            agg = stats[var]
            row.extend(_fmt(x) for x in (agg.mean[i], agg.std[i], agg.min[i], agg.max[i]))
        writer.writerow(row)
    return atomic_write_text(path, buf.getvalue())


def write_json(path, payload) -> Path:
    return atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _read_rows(path) -> tuple[list[str], list[dict[str, str]]]:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {p}: {exc}") from None
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise ConfigurationError(f"{p}: empty CSV")
    return list(reader.fieldnames), list(reader)


def load_run_csv(path) -> dict[int, dict[str, np.ndarray]]:
    """Per-run CSV back into arrays: {run_id: {column: values}}.

    The t column is included per run; a blank price column is dropped.
    """
    fields, rows = _read_rows(path)
    missing = [c for c in RUN_CSV_COLUMNS if c not in fields]
    if missing:
        raise ConfigurationError(f"{path}: missing run CSV columns {missing}")
    by_run: dict[int, dict[str, list[float]]] = {}
    for row in rows:
        rid = int(row["run_id"])
        dest = by_run.setdefault(rid, {c: [] for c in fields if c != "run_id"})
        for col, vals in dest.items():
            cell = row[col]
            if col == "price" and cell == "":
                continue
            vals.append(float(cell))
    out: dict[int, dict[str, np.ndarray]] = {}
    for rid, cols in by_run.items():
        out[rid] = {c: np.array(v) for c, v in cols.items() if v}
    return out


def load_aggregate_csv(path) -> dict[str, np.ndarray]:
    """Aggregate CSV back into arrays keyed by column name."""
    fields, rows = _read_rows(path)
    if "t" not in fields:
        raise ConfigurationError(f"{path}: aggregate CSV needs a t column")
    cols: Mapping[str, list[float]] = {c: [] for c in fields}
    for row in rows:
        for c in fields:
            cols[c].append(float(row[c]))
    return {c: np.array(v) for c, v in cols.items()}

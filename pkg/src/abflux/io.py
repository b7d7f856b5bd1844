"""File formats: trajectory CSV, events JSON, error tables and plot data."""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Dict, Iterable, Mapping

import numpy as np

from .dynamics import CSV_COLUMNS

FLOAT_FMT = "%.17g"


def write_columns_csv(path, columns: Mapping[str, np.ndarray], order: Iterable[str]) -> Path:
    """Write named columns with full float precision; header only when empty."""
    order = list(order)
    path = Path(path)
    data = np.column_stack([np.asarray(columns[k], dtype=float) for k in order]) if order else None
    with open(path, "w", newline="") as fh:
        fh.write(",".join(order) + "\n")
        if data is not None and len(data):
            np.savetxt(fh, data, fmt=FLOAT_FMT, delimiter=",")
    return path


def write_trajectory_csv(path, traj) -> Path:
    cols = traj.columns()
    return write_columns_csv(path, cols, CSV_COLUMNS if "q1" in cols else list(cols))


def read_csv_columns(path) -> Dict[str, np.ndarray]:
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        return {k: np.empty(0) for k in header}
    return {k: data[:, i] for i, k in enumerate(header)}


def write_events_json(path, events) -> Path:
    path = Path(path)
    path.write_text(json.dumps([{"kind": e.kind, "s": e.s} for e in events], indent=2) + "\n")
    return path


def read_events_json(path):
    return json.loads(Path(path).read_text())


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")
    return path


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_error_table_csv(path, table) -> Path:
    return write_columns_csv(path, {"f": table.f, "err": table.err, "horizon": table.horizon},
                             ("f", "err", "horizon"))


GNUPLOT_TEMPLATE = """\
# gnuplot script: trajectory in the configuration plane
set terminal pngcairo size 800,800
set output '{png}'
set size square
set xlabel 'q_1'
set ylabel 'q_2'
set key off
plot '{data}' using 1:2 with lines lw 1, \\
     '<echo 0 0' with points pt 7 ps 1.5
"""


def write_plot_data(path, traj) -> Path:
    """``(q1, q2)`` pairs plus a gnuplot script next to them (``.gp`` suffix)."""
    path = Path(path)
    with open(path, "w") as fh:
        fh.write("# q1 q2\n")
        if len(traj):
            np.savetxt(fh, traj.q, fmt=FLOAT_FMT)
    script = path.with_suffix(".gp")
    script.write_text(GNUPLOT_TEMPLATE.format(png=path.with_suffix(".png").name, data=path.name))
    return path

"""Spiral in, then drift out.

A strong initial energy (I2 = 20) is drained by the rising flux until the
orbit touches the flux line; afterwards the guiding center is pushed outward
while the energy stays roughly level.  Writes plot data and a gnuplot script.
"""
import sys
from pathlib import Path

import numpy as np

from abflux import cli
from abflux.io import read_csv_columns, read_events_json

out = Path(sys.argv[1] if len(sys.argv) > 1 else "fig1_out")
cli.main(["simulate", "--preset", "fig1", "--out", str(out)])
cols = read_csv_columns(out / "fig1_trajectory.csv")
s0 = next(e["s"] for e in read_events_json(out / "fig1_events.json") if e["kind"] == "hitting_time")
s, I2 = cols["s"], cols["I2"]
cn = np.hypot(cols["c1"], cols["c2"])
print(f"hitting time s0 = {s0:.3f}")
for t in (0, 5, 10, 15, s0, 40, 80, 120):
    i = min(np.searchsorted(s, t), len(s) - 1)
    print(f"  s={s[i]:7.2f}  I2={I2[i]:7.3f}  |c|={cn[i]:7.3f}")
print(f"plot data in {out / 'fig1_plot.dat'}; run `gnuplot {out / 'fig1_plot.gp'}`")

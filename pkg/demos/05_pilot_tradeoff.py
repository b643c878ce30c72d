#!/usr/bin/env python3
"""How long should the sensing phase be?

Longer pilots sharpen the direction estimate that drives the beamformer,
but every pilot symbol is one fewer data symbol.  The swept average
spectral efficiency rises while estimation improves, then falls once the
pilot overhead dominates: the allocation has an interior optimum.

Writes out/pilot_sweep/pilot_sweep.csv for the figure scripts.
"""

from vortex_isac import Scenario, Target, table1_config
from vortex_isac.harness import RunSpec, run_sweep_pilots, write_sweep_csv

import math

cfg = table1_config(Psen=128)
scenario = Scenario(
    targets=(Target(r=60.0, azimuth=math.radians(20), elevation=math.radians(25), v=3.0),)
)
spec = RunSpec(
    cfg=cfg, scenario=scenario, subcommand="sweep-pilots",
    seed=1, trials=8, out_dir="out/pilot_sweep",
)
rows = run_sweep_pilots(spec, psen_grid=(16, 24, 32, 48, 64, 96, 128, 192, 256), snr_db=15.0)
path = write_sweep_csv(spec, rows)

print(f"{'Psen':>6} {'angle err [deg]':>16} {'mean SINR [dB]':>15} {'SE avg':>10}")
for r in rows:
    print(
        f"{r['psen']:6d} {r['angle_err_deg']:16.4f} "
        f"{r['mean_sinr_db']:15.2f} {r['se_avg']:10.4f}"
    )
best = max(rows, key=lambda r: r["se_avg"])
print(f"\nbest allocation at Psen = {best['psen']} symbols; table written to {path}")

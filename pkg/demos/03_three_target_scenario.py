#!/usr/bin/env python3
"""Three moving targets: code-division multiplexing vs the classical baseline.

Reproduces the headline multi-target experiment: three scatterers at
(51 m, 15 deg, 25 deg), (69, 50, 30), (60, 20, 55) moving at 5 / 2.2 /
3.5 m/s, sensed at 15 dB.  The time-division baseline ignores the Doppler
rotation inside each code frame and pays for it with an azimuth bias that
grows with velocity; the compensated estimator does not.

Writes the CSV outputs (estimates, trace, spectra) under out/three_targets_*.
"""

import math

import numpy as np

from vortex_isac import Scenario, Target, table1_config
from vortex_isac.harness import RunSpec, run_sense

scenario = Scenario(
    targets=(
        Target(r=51.0, azimuth=math.radians(15), elevation=math.radians(25), v=5.0),
        Target(r=69.0, azimuth=math.radians(50), elevation=math.radians(30), v=2.2),
        Target(r=60.0, azimuth=math.radians(20), elevation=math.radians(55), v=3.5),
    ),
    comm_target_index=2,
    rng_seed=0,
)
cfg = table1_config(Psen=512)

for estimator in ("cdmm-vcmem", "tdmm-baseline"):
    spec = RunSpec(
        cfg=cfg, scenario=scenario, subcommand="sense", seed=42,
        out_dir=f"out/three_targets_{estimator}", estimator=estimator,
    )
    paths = run_sense(spec)
    print(f"\n=== {estimator} ===")
    lines = open(paths["estimates"]).read().splitlines()
    header = lines[1].split(",")
    idx = {h: i for i, h in enumerate(header)}
    errs = []
    for line in lines[2:]:
        v = line.split(",")
        errs.append(float(v[idx["pos_err_m"]]))
        print(
            f"  truth ({float(v[idx['r_true']]):5.1f} m, {float(v[idx['az_true_deg']]):5.2f}, "
            f"{float(v[idx['el_true_deg']]):5.2f} deg, {float(v[idx['v_true']]):4.1f} m/s) -> "
            f"est ({float(v[idx['r']]):6.2f}, {float(v[idx['az_deg']]):6.2f}, "
            f"{float(v[idx['el_deg']]):6.2f}, {float(v[idx['v']]):5.2f})"
            f"   3-D err {float(v[idx['pos_err_m']]):6.3f} m"
        )
    print(f"  mean 3-D error: {np.mean(errs):.3f} m; outputs in {paths['estimates'].parent}")

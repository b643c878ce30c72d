import math
from pathlib import Path

import numpy as np
import pytest

from vortex_isac.cli import main
from vortex_isac.config import Scenario, SystemConfig, Target, table1_config
from vortex_isac.harness import (
    MonteCarloCell,
    RunSpec,
    dump_hmatrix,
    match_estimates,
    run_link,
    run_mc,
    run_sense,
    run_sweep_pilots,
    selftest,
    spherical_to_cart,
    write_mc_csv,
    write_sweep_csv,
)
from vortex_isac.estimator import ParameterEstimate


def fast_cfg(**kw):
    base = dict(fc=77e9, df=1.5625e6, L=16, P=256, Psen=64, Tc=6.67e-6, M=8, N=8, U=4)
    base.update(kw)
    return SystemConfig(**base)


def one_target_scenario():
    return Scenario(
        targets=(Target(r=45.0, azimuth=0.7, elevation=0.5, v=3.0),), rng_seed=0
    )


def test_selftest_passes():
    assert selftest(verbose=False)


def test_spherical_to_cart():
    xyz = spherical_to_cart(10.0, 0.0, math.pi / 2)
    assert np.allclose(xyz, [10.0, 0.0, 0.0], atol=1e-12)
    xyz = spherical_to_cart(10.0, 0.0, 1e-9)
    assert xyz[2] == pytest.approx(10.0)


def test_match_estimates_pairs_nearest():
    cfg = fast_cfg()
    targets = (
        Target(r=40.0, azimuth=0.5, elevation=0.5),
        Target(r=60.0, azimuth=1.5, elevation=0.8),
    )
    ests = [
        ParameterEstimate(amplitude=1.0, r=60.1, f_d=0.0, azimuth=1.5, elevation=0.8),
        ParameterEstimate(amplitude=1.0, r=40.2, f_d=0.0, azimuth=0.5, elevation=0.5),
    ]
    pairs = match_estimates(cfg, targets, ests)
    assert pairs[0][1].r == 40.2 and pairs[1][1].r == 60.1
    assert pairs[0][2]["pos_err_m"] < 0.3


def test_run_sense_outputs_and_schema(tmp_path):
    spec = RunSpec(
        cfg=fast_cfg(), scenario=one_target_scenario(), subcommand="sense",
        seed=3, out_dir=str(tmp_path),
    )
    paths = run_sense(spec)
    for name in ("estimates", "trace", "spectra"):
        text = Path(paths[name]).read_text()
        lines = text.splitlines()
        assert lines[0].startswith("# config_hash=") and "seed=3" in lines[0]
        assert "," in lines[1]  # header row
        assert len(lines) > 2
    est_lines = Path(paths["estimates"]).read_text().splitlines()
    header = est_lines[1].split(",")
    assert header[:7] == ["target", "sigma_re", "sigma_im", "r", "v", "az_deg", "el_deg"]
    row = est_lines[2].split(",")
    assert abs(float(row[3]) - 45.0) < 0.1  # range close to truth
    spectra_header = Path(paths["spectra"]).read_text().splitlines()[1].split(",")
    assert spectra_header == ["panel", "target", "x", "y"]
    panels = {line.split(",")[0] for line in Path(paths["spectra"]).read_text().splitlines()[2:]}
    assert panels == {"range", "velocity", "azimuth", "elevation"}


def test_run_sense_deterministic_bytes(tmp_path):
    spec1 = RunSpec(cfg=fast_cfg(), scenario=one_target_scenario(),
                    subcommand="sense", seed=9, out_dir=str(tmp_path / "a"))
    spec2 = RunSpec(cfg=fast_cfg(), scenario=one_target_scenario(),
                    subcommand="sense", seed=9, out_dir=str(tmp_path / "b"))
    p1, p2 = run_sense(spec1), run_sense(spec2)
    for name in ("estimates", "trace", "spectra"):
        assert Path(p1[name]).read_bytes() == Path(p2[name]).read_bytes()


def test_run_sense_dump_cubes(tmp_path):
    spec = RunSpec(cfg=fast_cfg(), scenario=one_target_scenario(),
                   subcommand="sense", seed=3, out_dir=str(tmp_path), dump_cubes=True)
    paths = run_sense(spec)
    from vortex_isac.echo import load_cube

    cube = load_cube(paths["cube"])
    assert cube.values.shape == (64, 16)


def test_run_mc_deterministic_across_workers(tmp_path):
    cfg = fast_cfg(Psen=32)
    kw = dict(cfg=cfg, scenario=Scenario(targets=()), subcommand="mc", seed=100, trials=3)
    cells_serial = run_mc(RunSpec(workers=1, out_dir=str(tmp_path / "s"), **kw),
                          snrs=(15.0,), velocities=(0.0, 3.0))
    cells_pool = run_mc(RunSpec(workers=2, out_dir=str(tmp_path / "p"), **kw),
                        snrs=(15.0,), velocities=(0.0, 3.0))
    assert cells_serial == cells_pool
    pa = write_mc_csv(RunSpec(workers=1, out_dir=str(tmp_path / "s"), **kw), cells_serial)
    pb = write_mc_csv(RunSpec(workers=2, out_dir=str(tmp_path / "p"), **kw), cells_pool)
    assert Path(pa).read_bytes() == Path(pb).read_bytes()


def test_run_mc_csv_schema(tmp_path):
    cfg = fast_cfg(Psen=32)
    spec = RunSpec(cfg=cfg, scenario=Scenario(targets=()), subcommand="mc",
                   seed=5, trials=2, out_dir=str(tmp_path))
    cells = run_mc(spec, snrs=(15.0,), velocities=(0.0,))
    path = write_mc_csv(spec, cells)
    lines = Path(path).read_text().splitlines()
    assert lines[1] == "estimator,snr_db,velocity_mps,trials,pos_err_m,vel_err_mps,az_err_deg,el_err_deg"
    assert lines[2].startswith("cdmm-vcmem,15,0,2,")


def test_run_sweep_pilots_schema_and_endpoint(tmp_path):
    cfg = fast_cfg(P=128)
    spec = RunSpec(cfg=cfg, scenario=one_target_scenario(), subcommand="sweep-pilots",
                   seed=2, trials=2, out_dir=str(tmp_path))
    rows = run_sweep_pilots(spec, psen_grid=(16, 64, 128), snr_db=15.0)
    assert [r["psen"] for r in rows] == [16, 64, 128]
    assert rows[-1]["se_avg"] == 0.0  # Psen == P leaves no communication phase
    assert rows[0]["se_avg"] >= 0.0
    path = write_sweep_csv(spec, rows)
    lines = Path(path).read_text().splitlines()
    assert lines[1] == "psen,snr_db,angle_err_deg,mean_sinr_db,c_paper,se_avg"
    assert len(lines) == 2 + 3


def test_run_link(tmp_path):
    spec = RunSpec(cfg=fast_cfg(), scenario=one_target_scenario(), subcommand="link",
                   seed=1, out_dir=str(tmp_path))
    path = run_link(spec, true_csi=True)
    lines = Path(path).read_text().splitlines()
    assert lines[1] == "psen,snr_db,angle_err_deg,mean_sinr_db,c_paper,se_avg"
    vals = lines[2].split(",")
    assert float(vals[2]) == 0.0  # true CSI has no angle error
    assert float(vals[5]) > 0.0


def test_dump_hmatrix_matches_brute_force(tmp_path):
    from vortex_isac.decode import interference_matrix
    from vortex_isac.echo import doppler_of
    from vortex_isac.waveform import hadamard

    cfg = table1_config()
    path = dump_hmatrix(cfg, 8, 5.0, str(tmp_path))
    lines = Path(path).read_text().splitlines()
    assert lines[1] == "row,col,re,im"
    _, om = doppler_of(5.0, cfg.fc, cfg.c, cfg.Tc)
    H = interference_matrix(hadamard(3), 1, om)
    for line in lines[2:]:
        i, j, re, im = line.split(",")
        assert complex(float(re), float(im)) == pytest.approx(H[int(i) - 1, int(j) - 1], abs=1e-12)


def test_runspec_validation():
    with pytest.raises(ValueError):
        RunSpec(cfg=fast_cfg(), scenario=Scenario(targets=()), subcommand="mc", trials=0)
    with pytest.raises(ValueError):
        RunSpec(cfg=fast_cfg(), scenario=Scenario(targets=()), subcommand="mc",
                estimator="music")


def test_cli_selftest_and_sense(tmp_path, capsys):
    assert main(["selftest"]) == 0
    cfg_file = tmp_path / "run.json"
    cfg_file.write_text(
        """
        {"system": {"fc": 77e9, "df": 1.5625e6, "L": 16, "P": 256, "Psen": 64,
                    "Tc": 6.67e-6, "M": 8, "N": 8, "U": 4},
         "scenario": {"targets": [{"range_m": 45, "azimuth_deg": 40,
                                   "elevation_deg": 30, "velocity_mps": 3}]}}
        """
    )
    rc = main(["sense", "--config", str(cfg_file), "--seed", "1",
               "--out", str(tmp_path / "out")])
    assert rc == 0
    assert (tmp_path / "out" / "estimates.csv").exists()


def test_cli_reports_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"system": {"fc": 77e9, "df": 1.5625e6, "L": 16, "P": 8, "Psen": 64, "Tc": 6.67e-6}}')
    rc = main(["sense", "--config", str(bad)])
    assert rc == 2
    assert "Psen" in capsys.readouterr().err


def test_cli_dump_hmatrix(tmp_path, capsys):
    rc = main(["dump-hmatrix", "--modes", "8", "--velocity", "4",
               "--out", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out.strip()
    assert Path(out).exists()

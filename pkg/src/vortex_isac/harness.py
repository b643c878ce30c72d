"""Experiment harness: scenario runs, Monte Carlo sweeps, CSV export.

Every output CSV starts with a metadata comment line carrying the config
hash and master seed, then a header row; floats are written with %.12g so
identical (config, scenario, seed) runs produce byte-identical files
regardless of worker count.
"""

from __future__ import annotations

import csv
import io
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .comm import link_report
from .config import (
    Scenario,
    SystemConfig,
    Target,
    derive_quantities,
    run_hash,
    validate_scenario,
)
from .decode import (
    conj_decode_cube,
    decode_cube,
    interference_diag,
    interference_matrix,
)
from .echo import (
    DataCube,
    add_noise,
    doppler_of,
    noise_power_reference,
    save_cube,
    steering_matrix,
    slow_time_vector,
    synth_raw_cube,
)
from .estimator import (
    DecodePlan,
    EstimateSet,
    IterationTrace,
    ParameterEstimate,
    SearchGrids,
    TemplateBank,
    default_grids,
    e_step,
    nmse_db,
    resynth_estimate,
    run_vcm_em,
)
from .waveform import (
    CodeMatrix,
    ModeSet,
    PilotPlan,
    code_matrix,
    hadamard,
    identity_code,
    mode_set,
    pilots_all_ones,
    projection_matrix,
    window_code,
)

ESTIMATOR_CODES = {
    "cdmm-vcmem": "hadamard",
    "cdmm-nocomp": "hadamard",
    "tdmm-baseline": "identity",
}


@dataclass(frozen=True)
class RunSpec:
    """One harness invocation: what to run, where, and how reproducibly."""

    cfg: SystemConfig
    scenario: Scenario
    subcommand: str
    seed: int = 0
    trials: int = 50
    out_dir: str = "out"
    estimator: str = "cdmm-vcmem"
    workers: int = 1
    dump_cubes: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trial count must be >= 1")
        if self.estimator not in ESTIMATOR_CODES:
            raise ValueError(f"unknown estimator {self.estimator!r}")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".12g")
    return str(x)


def write_csv(path, header: list[str], rows, meta: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    meta_line = " ".join(f"{k}={v}" for k, v in meta.items())
    buf.write(f"# {meta_line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])
    path.write_text(buf.getvalue())


def build_waveform(cfg: SystemConfig, estimator: str):
    """Mode set, code, and pilots matching an estimator variant."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        modes = mode_set(cfg.M, cfg.U)
    code = code_matrix(ESTIMATOR_CODES[estimator], cfg.U)
    pilots = pilots_all_ones(cfg.Psen, cfg.L, cfg.U)
    return modes, code, pilots


_BANK_CACHE: dict[tuple, TemplateBank] = {}


def default_bank(cfg: SystemConfig) -> TemplateBank:
    """Per-process memo of the template bank (independent of Psen and SNR)."""
    key = (cfg.fc, cfg.df, cfg.L, cfg.M, cfg.N, cfg.U, cfg.Rt, cfg.Rr, cfg.Tc, cfg.c)
    if key not in _BANK_CACHE:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            modes = mode_set(cfg.M, cfg.U)
        _BANK_CACHE[key] = TemplateBank(cfg, modes, default_grids(cfg))
    return _BANK_CACHE[key]


def spherical_to_cart(r: float, azimuth: float, elevation: float) -> np.ndarray:
    return np.array(
        [
            r * math.sin(elevation) * math.cos(azimuth),
            r * math.sin(elevation) * math.sin(azimuth),
            r * math.cos(elevation),
        ]
    )


def match_estimates(
    cfg: SystemConfig, targets, estimates: list[ParameterEstimate]
) -> list[tuple[Target, ParameterEstimate, dict]]:
    """Greedily pair each truth target with its nearest unclaimed estimate."""
    pairs = []
    used: set[int] = set()
    for t in targets:
        t_xyz = spherical_to_cart(t.r, t.azimuth, t.elevation)
        best_d, best_i = None, None
        for i, e in enumerate(estimates):
            if i in used:
                continue
            d = float(np.linalg.norm(t_xyz - spherical_to_cart(e.r, e.azimuth, e.elevation)))
            if best_d is None or d < best_d:
                best_d, best_i = d, i
        if best_i is None:
            break
        used.add(best_i)
        e = estimates[best_i]
        daz = math.degrees(abs(((e.azimuth - t.azimuth) + math.pi) % (2 * math.pi) - math.pi))
        errs = {
            "pos_err_m": best_d,
            "vel_err_mps": abs(e.velocity(cfg.fc, cfg.c) - t.v),
            "az_err_deg": daz,
            "el_err_deg": math.degrees(abs(e.elevation - t.elevation)),
        }
        pairs.append((t, e, errs))
    return pairs


# ----------------------------------------------------------------------
# sense: one full synth -> decode -> estimate pipeline
# ----------------------------------------------------------------------

def sense_once(
    cfg: SystemConfig,
    scenario: Scenario,
    estimator: str,
    seed: int,
    grids: SearchGrids | None = None,
    bank: TemplateBank | None = None,
    snr_db: float | None = None,
):
    """Synthesize, add calibrated noise, and run the selected estimator."""
    modes, code, pilots = build_waveform(cfg, estimator)
    raw, per_target = synth_raw_cube(cfg, modes, code, pilots, scenario)
    snr = cfg.snr_db if snr_db is None else snr_db
    noisy = add_noise(raw, snr, seed, noise_power_reference(per_target))
    if bank is None and grids is None:
        bank = default_bank(cfg)
        grids = bank.grids
    est_set, trace = run_vcm_em(
        noisy, cfg, modes, code, pilots, Q=len(scenario.targets),
        grids=grids, variant=estimator, bank=bank,
    )
    return noisy, est_set, trace, (modes, code, pilots)


def target_spectra(
    cfg: SystemConfig,
    modes: ModeSet,
    code: CodeMatrix,
    pilots: PilotPlan,
    raw: DataCube,
    est_set: EstimateSet,
    estimator: str,
    bank: TemplateBank,
) -> list[dict[str, tuple[np.ndarray, np.ndarray]]]:
    """Per-target 1-D spectra (range, velocity, azimuth, elevation panels).

    Each target's spectra are computed on the raw cube with the other
    targets' reconstructions subtracted, conditioned on its own estimate.
    """
    plan = DecodePlan.for_variant(estimator, cfg, code.U)
    ests = est_set.estimates
    models = [resynth_estimate(cfg, modes, code, pilots, e) for e in ests]
    out = []
    for q, est in enumerate(ests):
        resid = raw.values - (np.sum(models, axis=0) - models[q])
        Z = e_step(resid, code, pilots, plan, cfg.beta1, est.f_d, cfg.Tc)
        n_slow = Z.shape[0]
        a = slow_time_vector(est.f_d, n_slow, plan.slow_dt)
        A = bank.steer(est.r, est.azimuth, est.elevation)
        panels: dict[str, tuple[np.ndarray, np.ndarray]] = {}

        bes = bank.bessel_at(est.elevation)
        mode_part = np.exp(1j * est.azimuth * modes.modes) * bank.i_neg
        g_l = np.einsum("plu,p,lu->l", Z, np.conj(a), np.conj(mode_part[None, :] * bes))
        nfft_r = 4 * cfg.L
        spec_r = np.abs(np.fft.fft(g_l, nfft_r))
        r_axis = np.arange(nfft_r) * cfg.c / (2.0 * cfg.df * nfft_r)
        panels["range"] = (r_axis, spec_r)

        g_p = np.einsum("plu,lu->p", Z, np.conj(A))
        nfft_v = 1 << max(int(4 * n_slow - 1).bit_length(), 3)
        spec_v = np.abs(np.fft.fft(g_p, nfft_v))
        freqs = np.fft.fftfreq(nfft_v)
        v_axis = freqs * cfg.c / (2.0 * cfg.fc * plan.slow_dt)
        order = np.argsort(v_axis)
        keep = np.abs(v_axis[order]) <= bank.v_max * 1.05
        panels["velocity"] = (v_axis[order][keep], spec_v[order][keep])

        range_part = (np.exp(2j * bank.k_l * est.r) / est.r**2)[:, None]
        g_u = np.einsum(
            "plu,p,lu->u", Z, np.conj(a), np.conj(range_part * bank.i_neg[None, :] * bes)
        )
        K = 8 * modes.U
        buf = np.zeros(K, dtype=complex)
        buf[np.asarray(modes.modes) % K] = g_u
        spec_az = np.abs(np.fft.fft(buf))
        panels["azimuth"] = (np.degrees(2.0 * np.pi * np.arange(K) / K), spec_az)

        h = np.einsum("plu,p->lu", Z, np.conj(a))
        phase = np.exp(2j * bank.k_l * est.r)[:, None] * mode_part[None, :]
        corr = np.einsum("tlu,lu->t", bank.bessel_products, np.conj(phase) * h)
        score = np.abs(corr) ** 2 / np.maximum(bank.el_norm2, 1e-300)
        panels["elevation"] = (np.degrees(bank.grids.elevation), score)
        out.append(panels)
    return out


def run_sense(spec: RunSpec) -> dict[str, Path]:
    """Single-scenario pipeline; writes estimates, trace, and spectra CSVs."""
    cfg, scenario = spec.cfg, spec.scenario
    for note in validate_scenario(cfg, scenario):
        warnings.warn(note, stacklevel=2)
    grids = default_grids(cfg)
    modes, code, pilots = build_waveform(cfg, spec.estimator)
    bank = TemplateBank(cfg, modes, grids)
    noisy, est_set, trace, _ = sense_once(
        cfg, scenario, spec.estimator, spec.seed, grids=grids, bank=bank
    )
    meta = {
        "config_hash": run_hash(cfg, scenario),
        "seed": spec.seed,
        "estimator": spec.estimator,
    }
    out = Path(spec.out_dir)
    paths = {}

    pairs = match_estimates(cfg, scenario.targets, est_set.estimates)
    est_rows = []
    for q, (t, e, errs) in enumerate(pairs):
        est_rows.append(
            [
                q, e.amplitude.real, e.amplitude.imag, e.r,
                e.velocity(cfg.fc, cfg.c), math.degrees(e.azimuth),
                math.degrees(e.elevation),
                t.r, t.v, math.degrees(t.azimuth), math.degrees(t.elevation),
                errs["pos_err_m"], errs["vel_err_mps"],
                errs["az_err_deg"], errs["el_err_deg"],
            ]
        )
    paths["estimates"] = out / "estimates.csv"
    write_csv(
        paths["estimates"],
        [
            "target", "sigma_re", "sigma_im", "r", "v", "az_deg", "el_deg",
            "r_true", "v_true", "az_true_deg", "el_true_deg",
            "pos_err_m", "vel_err_mps", "az_err_deg", "el_err_deg",
        ],
        est_rows,
        meta,
    )

    trace_rows = []
    for it, (nm, ests) in enumerate(zip(trace.nmse_db, trace.history), start=1):
        for q, e in enumerate(ests):
            trace_rows.append(
                [
                    it, q, e.amplitude.real, e.amplitude.imag, e.r,
                    e.velocity(cfg.fc, cfg.c), math.degrees(e.azimuth),
                    math.degrees(e.elevation), nm,
                ]
            )
    paths["trace"] = out / "trace.csv"
    write_csv(
        paths["trace"],
        ["iter", "target", "sigma_re", "sigma_im", "r", "v", "az_deg", "el_deg", "nmse_db"],
        trace_rows,
        meta,
    )

    spectra = target_spectra(cfg, modes, code, pilots, noisy, est_set, spec.estimator, bank)
    spec_rows = []
    for q, panels in enumerate(spectra):
        for panel, (x, y) in panels.items():
            step = max(1, x.size // 1024)
            for xi, yi in zip(x[::step], y[::step]):
                spec_rows.append([panel, q, xi, yi])
    paths["spectra"] = out / "spectra.csv"
    write_csv(paths["spectra"], ["panel", "target", "x", "y"], spec_rows, meta)

    if spec.dump_cubes:
        paths["cube"] = out / "raw_cube.bin"
        save_cube(noisy, paths["cube"])
    return paths


# ----------------------------------------------------------------------
# mc: Monte Carlo cells over (snr, velocity)
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class MonteCarloCell:
    estimator: str
    snr_db: float
    velocity: float
    trials: int
    pos_err_m: float
    vel_err_mps: float
    az_err_deg: float
    el_err_deg: float


def _mc_trial(args) -> dict:
    (cfg_kw, estimator, snr_db, velocity, seed) = args
    cfg = SystemConfig(**cfg_kw)
    rng = np.random.Generator(np.random.Philox(seed))
    r = rng.uniform(30.0, 60.0)
    az = math.radians(rng.uniform(5.0, 80.0))
    el = math.radians(rng.uniform(5.0, 80.0))
    scenario = Scenario(
        targets=(Target(r=r, azimuth=az, elevation=el, v=velocity),), rng_seed=seed
    )
    _, est_set, _, _ = sense_once(cfg, scenario, estimator, seed, snr_db=snr_db)
    _, _, errs = match_estimates(cfg, scenario.targets, est_set.estimates)[0]
    return errs


def run_mc(
    spec: RunSpec,
    snrs: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0),
    velocities: tuple[float, ...] = (0.0, 3.0, 5.0, 8.0, 10.0),
    estimators: tuple[str, ...] | None = None,
) -> list[MonteCarloCell]:
    """Random-target trials per (snr, velocity) cell, averaged.

    Trial i draws its target from range 30-60 m and angles 5-80 deg using
    Philox(seed + i), so cells and estimator variants share target draws
    (paired comparisons) and the whole sweep is reproducible and
    worker-count independent.
    """
    estimators = estimators or (spec.estimator,)
    cfg_kw = {
        k: getattr(spec.cfg, k)
        for k in ("fc", "df", "L", "P", "Psen", "Tc", "M", "N", "Rt", "Rr", "Rr_ue", "U", "beta", "c", "snr_db")
    }
    jobs = []
    for est in estimators:
        for snr in snrs:
            for v in velocities:
                for i in range(spec.trials):
                    jobs.append((cfg_kw, est, snr, v, spec.seed + i))
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_mc_trial, jobs, chunksize=4))
    else:
        results = [_mc_trial(j) for j in jobs]

    cells = []
    idx = 0
    for est in estimators:
        for snr in snrs:
            for v in velocities:
                errs = results[idx : idx + spec.trials]
                idx += spec.trials
                cells.append(
                    MonteCarloCell(
                        estimator=est, snr_db=snr, velocity=v, trials=spec.trials,
                        pos_err_m=float(np.mean([e["pos_err_m"] for e in errs])),
                        vel_err_mps=float(np.mean([e["vel_err_mps"] for e in errs])),
                        az_err_deg=float(np.mean([e["az_err_deg"] for e in errs])),
                        el_err_deg=float(np.mean([e["el_err_deg"] for e in errs])),
                    )
                )
    return cells


def write_mc_csv(spec: RunSpec, cells: list[MonteCarloCell]) -> Path:
    path = Path(spec.out_dir) / "mc_summary.csv"
    meta = {
        "config_hash": run_hash(spec.cfg, spec.scenario),
        "seed": spec.seed,
        "trials": spec.trials,
    }
    rows = [
        [c.estimator, c.snr_db, c.velocity, c.trials,
         c.pos_err_m, c.vel_err_mps, c.az_err_deg, c.el_err_deg]
        for c in cells
    ]
    write_csv(
        path,
        ["estimator", "snr_db", "velocity_mps", "trials",
         "pos_err_m", "vel_err_mps", "az_err_deg", "el_err_deg"],
        rows,
        meta,
    )
    return path


# ----------------------------------------------------------------------
# sweep-pilots: sensing/communication frame allocation trade-off
# ----------------------------------------------------------------------

def _sweep_trial(args) -> dict:
    (cfg_kw, estimator, psen, seed, snr_db) = args
    cfg = SystemConfig(**{**cfg_kw, "Psen": psen})
    rng = np.random.Generator(np.random.Philox(seed))
    target = Target(
        r=float(rng.uniform(40.0, 60.0)),
        azimuth=math.radians(float(rng.uniform(10.0, 70.0))),
        elevation=math.radians(float(rng.uniform(10.0, 70.0))),
        v=3.0,
    )
    scenario = Scenario(targets=(target,), rng_seed=seed)
    _, est_set, _, (modes, _, _) = sense_once(cfg, scenario, estimator, seed, snr_db=snr_db)
    t, e, errs = match_estimates(cfg, scenario.targets, est_set.estimates)[0]
    rep = link_report(
        cfg, modes, t, e.r, e.velocity(cfg.fc, cfg.c), e.azimuth, e.elevation,
        psen=psen, snr_db=snr_db,
    )
    return {
        "angle_err_deg": errs["az_err_deg"],
        "mean_sinr_db": rep.mean_sinr_db,
        "c_paper": rep.c_paper,
        "se_avg": rep.se_avg,
    }


def run_sweep_pilots(
    spec: RunSpec,
    psen_grid: tuple[int, ...] = (16, 24, 32, 48, 64, 96, 128, 192, 256),
    snr_db: float | None = None,
) -> list[dict]:
    """Sense -> feed estimates into the link -> record SE per pilot length."""
    snr = spec.cfg.snr_db if snr_db is None else snr_db
    cfg_kw = {
        k: getattr(spec.cfg, k)
        for k in ("fc", "df", "L", "P", "Psen", "Tc", "M", "N", "Rt", "Rr", "Rr_ue", "U", "beta", "c", "snr_db")
    }
    jobs = [
        (cfg_kw, spec.estimator, psen, spec.seed + i, snr)
        for psen in psen_grid
        for i in range(spec.trials)
    ]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_sweep_trial, jobs, chunksize=2))
    else:
        results = [_sweep_trial(j) for j in jobs]
    rows = []
    idx = 0
    for psen in psen_grid:
        chunk = results[idx : idx + spec.trials]
        idx += spec.trials
        rows.append(
            {
                "psen": psen,
                "snr_db": snr,
                "angle_err_deg": float(np.mean([c["angle_err_deg"] for c in chunk])),
                "mean_sinr_db": float(np.mean([c["mean_sinr_db"] for c in chunk])),
                "c_paper": float(np.mean([c["c_paper"] for c in chunk])),
                "se_avg": float(np.mean([c["se_avg"] for c in chunk])),
            }
        )
    return rows


def write_sweep_csv(spec: RunSpec, rows: list[dict]) -> Path:
    path = Path(spec.out_dir) / "pilot_sweep.csv"
    meta = {
        "config_hash": run_hash(spec.cfg, spec.scenario),
        "seed": spec.seed,
        "trials": spec.trials,
    }
    header = ["psen", "snr_db", "angle_err_deg", "mean_sinr_db", "c_paper", "se_avg"]
    write_csv(path, header, [[r[h] for h in header] for r in rows], meta)
    return path


# ----------------------------------------------------------------------
# link: one sensing-aided link evaluation
# ----------------------------------------------------------------------

def run_link(spec: RunSpec, true_csi: bool = False) -> Path:
    """Sense the scenario, then evaluate the communication link to the UE."""
    cfg, scenario = spec.cfg, spec.scenario
    if not scenario.targets:
        raise ValueError("link evaluation needs at least one target")
    ue = scenario.targets[scenario.comm_target_index]
    modes, _, _ = build_waveform(cfg, spec.estimator)
    if true_csi:
        r, v, az, el = ue.r, ue.v, ue.azimuth, ue.elevation
        angle_err = 0.0
    else:
        _, est_set, _, _ = sense_once(cfg, scenario, spec.estimator, spec.seed)
        matched = {
            id(t): (e, errs) for t, e, errs in
            match_estimates(cfg, scenario.targets, est_set.estimates)
        }
        e, errs = matched[id(ue)]
        r, v, az, el = e.r, e.velocity(cfg.fc, cfg.c), e.azimuth, e.elevation
        angle_err = errs["az_err_deg"]
    rep = link_report(cfg, modes, ue, r, v, az, el, psen=cfg.Psen)
    path = Path(spec.out_dir) / "link.csv"
    meta = {"config_hash": run_hash(cfg, scenario), "seed": spec.seed}
    write_csv(
        path,
        ["psen", "snr_db", "angle_err_deg", "mean_sinr_db", "c_paper", "se_avg"],
        [[cfg.Psen, cfg.snr_db, angle_err, rep.mean_sinr_db, rep.c_paper, rep.se_avg]],
        meta,
    )
    return path


# ----------------------------------------------------------------------
# selftest and the interference-matrix dump
# ----------------------------------------------------------------------

def selftest(cfg: SystemConfig | None = None, verbose: bool = True) -> bool:
    """Run the analytic identities; returns True when every check passes."""
    from .config import table1_config
    from .comm import (
        approx_distance,
        effective_channel,
        exact_distance,
        los_channel,
    )

    cfg = cfg or table1_config()
    checks: list[tuple[str, bool, str]] = []

    ok = True
    for kappa in range(1, 5):
        U = 2**kappa
        code = hadamard(kappa)
        for p in range(1, 2 * U + 1):
            G = window_code(code, p).T @ window_code(code, p)
            ok &= np.array_equal(G.astype(int), U * np.eye(U, dtype=int))
    checks.append(("code orthogonality (P W)^T (P W) = U I", ok, "exact"))

    rng = np.random.Generator(np.random.Philox(123))
    worst = 0.0
    for U in (4, 8, 16):
        code = hadamard(int(math.log2(U)))
        for _ in range(20):
            om = complex(np.exp(1j * rng.uniform(-np.pi, np.pi)))
            H = interference_matrix(code, int(rng.integers(1, 64)), om)
            worst = max(worst, float(np.max(np.abs(np.diag(H) - interference_diag(U, om)))))
    checks.append(("interference diagonal closed form", worst < 1e-12, f"max {worst:.2e}"))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        modes = mode_set(cfg.M, cfg.U)
    code = hadamard(int(math.log2(cfg.U)))
    small = replace(cfg, Psen=4 * cfg.U)
    pilots = pilots_all_ones(small.Psen, small.L, small.U)
    t = Target(r=45.0, azimuth=math.radians(30), elevation=math.radians(40), v=4.0)
    raw, _ = synth_raw_cube(small, modes, code, pilots, Scenario(targets=(t,)))
    f_d, om = doppler_of(t.v, small.fc, small.c, small.Tc)
    Z = conj_decode_cube(raw, code, om, pilots)
    A = steering_matrix(small, modes, t.r, t.azimuth, t.elevation)
    a = slow_time_vector(f_d, Z.values.shape[0], small.Tc)
    ideal = small.beta1 * A[None, :, :] * a[:, None, None]
    rel = float(np.max(np.abs(Z.values - ideal)) / np.max(np.abs(ideal)))
    checks.append(("conjugate-matched decode cancels motion", rel < 1e-12, f"rel {rel:.2e}"))

    t0 = Target(r=60.0, azimuth=0.0, elevation=0.0, v=0.0)
    Hc = los_channel(cfg, t0, 1, 1)
    He = effective_channel(Hc, modes, None)
    diag_p = float(np.sum(np.abs(np.diag(He)) ** 2))
    off_p = float(np.sum(np.abs(He) ** 2) - diag_p)
    ratio_db = -math.inf if off_p == 0.0 else 10.0 * math.log10(off_p / diag_p)
    checks.append(("aligned channel diagonalizes", ratio_db < -200.0, f"{ratio_db:.0f} dB"))

    t2 = Target(r=60.0, azimuth=math.radians(20), elevation=math.radians(25), v=0.0)
    worst_d = max(
        abs(exact_distance(cfg, t2, 2, n, m) - approx_distance(cfg, t2, 2, n, m))
        for n in range(1, cfg.N + 1)
        for m in range(1, cfg.M + 1)
    )
    checks.append(("far-field distance expansion", worst_d < 1e-4, f"max {worst_d:.2e} m"))

    all_ok = all(ok for _, ok, _ in checks)
    if verbose:
        width = max(len(name) for name, _, _ in checks)
        for name, okc, detail in checks:
            print(f"{name:<{width}}  {'PASS' if okc else 'FAIL'}  {detail}")
        print("self test:", "PASS" if all_ok else "FAIL")
    return all_ok


def dump_hmatrix(cfg: SystemConfig, U: int, velocity: float, out_dir: str) -> Path:
    """Write the interference matrix for (U, v) as a CSV of complex entries."""
    code = hadamard(int(math.log2(U)))
    _, om = doppler_of(velocity, cfg.fc, cfg.c, cfg.Tc)
    H = interference_matrix(code, 1, om)
    rows = [[i + 1, j + 1, H[i, j].real, H[i, j].imag] for i in range(U) for j in range(U)]
    path = Path(out_dir) / f"hmatrix_U{U}_v{velocity:g}.csv"
    write_csv(
        path,
        ["row", "col", "re", "im"],
        rows,
        {"U": U, "velocity_mps": velocity, "omega_re": om.real, "omega_im": om.imag},
    )
    return path

import itertools
import math

import numpy as np
import pytest

from vortex_isac.config import Scenario, SystemConfig, Target, derive_quantities, table1_config
from vortex_isac.decode import decode_cube
from vortex_isac.echo import (
    DataCube,
    add_noise,
    doppler_of,
    noise_power_reference,
    slow_time_vector,
    steering_matrix,
    synth_raw_cube,
)
from vortex_isac.estimator import (
    DecodePlan,
    ParameterEstimate,
    TemplateBank,
    _amplitude_update,
    default_grids,
    e_step,
    init_estimates,
    m_step,
    nmse_db,
    residual_cube,
    resynth_estimate,
    run_vcm_em,
    vcm_velocity,
)
from vortex_isac.waveform import hadamard, identity_code, mode_set, pilots_all_ones


def small_cfg(**kw):
    base = dict(fc=77e9, df=1.5625e6, L=12, P=256, Psen=48, Tc=6.67e-6, M=8, N=8, U=4)
    base.update(kw)
    return SystemConfig(**base)


def setup(cfg, targets, code=None, snr_db=None, seed=0):
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        modes = mode_set(cfg.M, cfg.U)
    code = code if code is not None else hadamard(int(math.log2(cfg.U)))
    pilots = pilots_all_ones(cfg.Psen, cfg.L, cfg.U)
    raw, per = synth_raw_cube(cfg, modes, code, pilots, Scenario(targets=targets))
    if snr_db is not None:
        raw = add_noise(raw, snr_db, seed, noise_power_reference(per))
    return modes, code, pilots, raw, per


def grid_target(cfg, grids):
    """A target whose parameters sit exactly on the estimator's search grids."""
    nfft_r = 1 << (4 * cfg.L - 1).bit_length()
    r = 32 * cfg.c / (2.0 * cfg.df * nfft_r)
    K = 1 << (8 * cfg.U - 1).bit_length()
    az = 2.0 * math.pi * (K // 8) / K
    el = grids.elevation[116]  # 30 deg for the default 0.25-degree grid
    return Target(r=r, azimuth=az, elevation=float(el), v=0.0)


# ----------------------------------------------------------------------
# initialization
# ----------------------------------------------------------------------

def test_init_zero_targets_empty():
    cfg = small_cfg()
    est, trace = run_vcm_em(
        DataCube(values=np.ones((cfg.Psen, cfg.L), dtype=complex), stage="raw"),
        cfg, mode_set(cfg.M, cfg.U), hadamard(2),
        pilots_all_ones(cfg.Psen, cfg.L, cfg.U), Q=0,
    )
    assert est.estimates == []
    assert trace.converged


def test_init_recovers_on_grid_static_target_exactly():
    cfg = small_cfg()
    grids = default_grids(cfg)
    t = grid_target(cfg, grids)
    modes, code, pilots, raw, _ = setup(cfg, (t,))
    bank = TemplateBank(cfg, modes, grids)
    plan = DecodePlan.for_variant("cdmm-vcmem", cfg, cfg.U)
    ests = init_estimates(raw, cfg, modes, code, pilots, 1, bank, plan)
    e = ests[0]
    assert e.r == pytest.approx(t.r, abs=1e-6)
    assert e.azimuth == pytest.approx(t.azimuth, abs=1e-8)
    assert e.elevation == pytest.approx(t.elevation, abs=1e-8)
    assert e.velocity(cfg.fc, cfg.c) == pytest.approx(0.0, abs=1e-9)
    assert abs(e.amplitude - 1.0) < 1e-6


def test_init_three_target_ranges_within_one_bin():
    cfg = table1_config(Psen=512)
    grids = default_grids(cfg)
    modes, code, pilots, raw, per = setup(
        table1_config(Psen=512),
        (
            Target(r=51.0, azimuth=math.radians(15), elevation=math.radians(25), v=5.0),
            Target(r=69.0, azimuth=math.radians(50), elevation=math.radians(30), v=2.2),
            Target(r=60.0, azimuth=math.radians(20), elevation=math.radians(55), v=3.5),
        ),
        snr_db=15.0,
        seed=42,
    )
    bank = TemplateBank(cfg, modes, grids)
    plan = DecodePlan.for_variant("cdmm-vcmem", cfg, cfg.U)
    ests = init_estimates(raw, cfg, modes, code, pilots, 3, bank, plan)
    dq = derive_quantities(cfg)
    got = sorted(e.r for e in ests)
    for r_hat, r_true in zip(got, [51.0, 60.0, 69.0]):
        assert abs(r_hat - r_true) <= dq.range_resolution


# ----------------------------------------------------------------------
# residuals and the normalized residual metric
# ----------------------------------------------------------------------

def test_residual_single_target_is_raw():
    cfg = small_cfg()
    t = Target(r=40.0, azimuth=0.7, elevation=0.5, v=2.0)
    modes, code, pilots, raw, _ = setup(cfg, (t,))
    est = ParameterEstimate(amplitude=1.0, r=40.0, f_d=0.0, azimuth=0.7, elevation=0.5)
    resid = residual_cube(raw, cfg, modes, code, pilots, [est], 0)
    assert np.array_equal(resid, raw.values)


def test_residual_exact_parameters_isolates_target():
    cfg = small_cfg()
    t1 = Target(r=40.0, azimuth=0.7, elevation=0.5, v=2.0)
    t2 = Target(r=55.0, azimuth=1.5, elevation=0.9, v=-3.0)
    modes, code, pilots, raw, per = setup(cfg, (t1, t2))
    ests = []
    for t in (t1, t2):
        f_d, _ = doppler_of(t.v, cfg.fc, cfg.c, cfg.Tc)
        ests.append(
            ParameterEstimate(
                amplitude=t.reflectivity, r=t.r, f_d=f_d,
                azimuth=t.azimuth, elevation=t.elevation,
            )
        )
    resid0 = residual_cube(raw, cfg, modes, code, pilots, ests, 0)
    assert np.max(np.abs(resid0 - per[0])) < 1e-10 * np.max(np.abs(per[0]))
    # removing every synthesized estimate returns the raw cube
    total = sum(resynth_estimate(cfg, modes, code, pilots, e) for e in ests)
    assert np.allclose(resid0 + resynth_estimate(cfg, modes, code, pilots, ests[1]), raw.values)
    assert np.allclose(raw.values - total, 0.0, atol=1e-12 * np.max(np.abs(raw.values)))


def test_nmse_values():
    raw = np.ones((4, 4), dtype=complex)
    assert nmse_db(raw, raw) == -300.0          # perfect model hits the floor
    assert nmse_db(raw, None) == 0.0            # empty model leaves everything
    assert nmse_db(raw, 0.5 * raw) == pytest.approx(10 * math.log10(0.25))
    with pytest.raises(ValueError):
        nmse_db(np.zeros((2, 2), dtype=complex), None)


# ----------------------------------------------------------------------
# velocity-consistency matching and the compensated decode
# ----------------------------------------------------------------------

def test_vcm_recovers_on_grid_velocity_exactly():
    cfg = small_cfg(Psen=128, P=256)
    grids = default_grids(cfg)
    t = Target(r=45.0, azimuth=0.9, elevation=0.6, v=3.25)  # multiple of 0.05
    modes, code, pilots, raw, _ = setup(cfg, (t,))
    bank = TemplateBank(cfg, modes, grids)
    plan = DecodePlan.for_variant("cdmm-vcmem", cfg, cfg.U)
    prev = ParameterEstimate(
        amplitude=1.0, r=t.r, f_d=0.0, azimuth=t.azimuth, elevation=t.elevation
    )
    v_star = vcm_velocity(raw.values, code, pilots, bank, prev, plan)
    assert v_star == pytest.approx(3.25, abs=1e-12)


def test_vcm_zero_velocity_self_consistent():
    cfg = small_cfg(Psen=128, P=256)
    t = Target(r=45.0, azimuth=0.9, elevation=0.6, v=0.0)
    modes, code, pilots, raw, _ = setup(cfg, (t,))
    bank = TemplateBank(cfg, modes, default_grids(cfg))
    plan = DecodePlan.for_variant("cdmm-vcmem", cfg, cfg.U)
    prev = ParameterEstimate(
        amplitude=1.0, r=t.r, f_d=0.0, azimuth=t.azimuth, elevation=t.elevation
    )
    assert vcm_velocity(raw.values, code, pilots, bank, prev, plan) == 0.0


def test_e_step_matched_recovers_ideal_echo():
    cfg = small_cfg()
    t = Target(r=45.0, azimuth=0.9, elevation=0.6, v=4.0)
    modes, code, pilots, raw, _ = setup(cfg, (t,))
    plan = DecodePlan.for_variant("cdmm-vcmem", cfg, cfg.U)
    f_d, _ = doppler_of(t.v, cfg.fc, cfg.c, cfg.Tc)
    Z = e_step(raw.values, code, pilots, plan, cfg.beta1, f_d, cfg.Tc)
    A = steering_matrix(cfg, modes, t.r, t.azimuth, t.elevation)
    a = slow_time_vector(f_d, Z.shape[0], cfg.Tc)
    ideal = A[None] * a[:, None, None]
    assert np.max(np.abs(Z - ideal)) < 1e-10 * np.max(np.abs(ideal))


def test_e_step_zero_velocity_equals_plain_decode():
    cfg = small_cfg()
    t = Target(r=45.0, azimuth=0.9, elevation=0.6, v=4.0)
    modes, code, pilots, raw, _ = setup(cfg, (t,))
    plan = DecodePlan.for_variant("cdmm-vcmem", cfg, cfg.U)
    Z = e_step(raw.values, code, pilots, plan, cfg.beta1, 0.0, cfg.Tc)
    ref = decode_cube(raw, code, pilots).values / cfg.beta1
    assert np.array_equal(Z, ref)


def test_e_step_mismatch_leaves_phase_ratio_ramp():
    # after dividing out the believed slow-time vector, the template-matched
    # response still advances by the phasor of the velocity offset (the
    # window-local leakage contributes only at the offset's own order)
    cfg = small_cfg()
    t = Target(r=45.0, azimuth=0.9, elevation=0.6, v=4.0)
    modes, code, pilots, raw, _ = setup(cfg, (t,))
    plan = DecodePlan.for_variant("cdmm-vcmem", cfg, cfg.U)
    dv = 0.2
    f_hat, _ = doppler_of(t.v - dv, cfg.fc, cfg.c, cfg.Tc)
    Z = e_step(raw.values, code, pilots, plan, cfg.beta1, f_hat, cfg.Tc)
    a_hat = slow_time_vector(f_hat, Z.shape[0], cfg.Tc)
    _, om_delta = doppler_of(dv, cfg.fc, cfg.c, cfg.Tc)
    A = steering_matrix(cfg, modes, t.r, t.azimuth, t.elevation)
    g = np.einsum("plu,lu->p", Z / a_hat[:, None, None], np.conj(A))
    ratios = g[1:] / g[:-1]
    assert np.max(np.abs(ratios - om_delta)) < 5e-3
    # and the matched-filter output is strongest at the true offset
    assert abs(np.mean(ratios) - om_delta) < 1e-3


# ----------------------------------------------------------------------
# M-step updates
# ----------------------------------------------------------------------

def test_m_step_converges_to_on_grid_truth():
    # one pass from a perturbed start removes most of the error; the
    # re-conditioned second pass pins the on-grid parameters
    cfg = small_cfg()
    grids = default_grids(cfg)
    t = grid_target(cfg, grids)
    modes, code, pilots, raw, _ = setup(cfg, (t,))
    bank = TemplateBank(cfg, modes, grids)
    plan = DecodePlan.for_variant("cdmm-vcmem", cfg, cfg.U)
    Z = e_step(raw.values, code, pilots, plan, cfg.beta1, 0.0, cfg.Tc)
    start = ParameterEstimate(
        amplitude=1.0, r=t.r + 0.4, f_d=0.0,
        azimuth=t.azimuth + 0.05, elevation=t.elevation - 0.03,
    )
    once = m_step(Z, bank, start, plan)
    assert once.r == pytest.approx(t.r, abs=1e-3)
    assert once.azimuth == pytest.approx(t.azimuth, abs=1e-4)
    assert once.elevation == pytest.approx(t.elevation, abs=1e-3)
    out = m_step(Z, bank, m_step(Z, bank, once, plan), plan)
    assert out.r == pytest.approx(t.r, abs=1e-7)
    assert out.azimuth == pytest.approx(t.azimuth, abs=1e-8)
    assert out.elevation == pytest.approx(t.elevation, abs=1e-6)
    assert out.f_d == pytest.approx(0.0, abs=1e-4)
    assert abs(out.amplitude - 1.0) < 1e-6
    assert not out.degenerate


def test_m_step_degenerate_input_keeps_prior():
    cfg = small_cfg()
    bank = TemplateBank(cfg, mode_set(cfg.M, cfg.U), default_grids(cfg))
    plan = DecodePlan.for_variant("cdmm-vcmem", cfg, cfg.U)
    prior = ParameterEstimate(amplitude=0.5, r=33.0, f_d=100.0, azimuth=1.0, elevation=0.6)
    out = m_step(np.zeros((5, cfg.L, cfg.U), dtype=complex), bank, prior, plan)
    assert out.degenerate
    assert (out.r, out.f_d, out.azimuth, out.elevation) == (33.0, 100.0, 1.0, 0.6)


def test_amplitude_self_projection_is_unity():
    rng = np.random.default_rng(2)
    template = rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4))
    a = np.exp(1j * rng.uniform(size=9))
    Z = a[:, None, None] * template[None]
    assert _amplitude_update(Z, a, template) == pytest.approx(1.0)


# ----------------------------------------------------------------------
# the full loop
# ----------------------------------------------------------------------

def test_run_vcm_em_oracle_equivalence_small_scale():
    """Against a brute-force Cartesian grid search over (r, az, el, v).

    Noiseless on-grid targets: the sequential estimator and the exhaustive
    minimizer of the per-target residual must land on the same grid points.
    """
    cfg = small_cfg()
    grids = default_grids(cfg)
    t1 = grid_target(cfg, grids)
    nfft_r = 1 << (4 * cfg.L - 1).bit_length()
    K = 1 << (8 * cfg.U - 1).bit_length()
    t2 = Target(
        r=20 * cfg.c / (2.0 * cfg.df * nfft_r),
        azimuth=2.0 * math.pi * (3 * K // 8) / K,
        elevation=float(grids.elevation[196]),
        v=0.0,
    )
    modes, code, pilots, raw, per = setup(cfg, (t1, t2))
    est, _ = run_vcm_em(raw, cfg, modes, code, pilots, Q=2, grids=grids)

    # oracle: coarse Cartesian product containing the true grid points,
    # scored by the amplitude-profiled residual on each isolated cube
    r_cand = np.array([10, 20, 26, 32, 40]) * cfg.c / (2.0 * cfg.df * nfft_r)
    az_cand = 2.0 * math.pi * np.array([K // 16, K // 8, 3 * K // 8, K // 2]) / K
    el_cand = grids.elevation[[36, 116, 196, 276]]
    v_cand = np.array([-0.5, 0.0, 0.5])
    oracle = []
    for q, t in enumerate((t1, t2)):
        Z = e_step(per[q], code, pilots, DecodePlan.for_variant("cdmm-vcmem", cfg, cfg.U),
                   cfg.beta1, 0.0, cfg.Tc)
        z2 = float(np.vdot(Z, Z).real)
        best, arg = None, None
        for r, az, el, v in itertools.product(r_cand, az_cand, el_cand, v_cand):
            A = steering_matrix(cfg, modes, r, az, float(el))
            f_d = -2.0 * v * cfg.fc / cfg.c
            a = slow_time_vector(f_d, Z.shape[0], cfg.Tc)
            T = a[:, None, None] * A[None]
            num = abs(np.vdot(T, Z)) ** 2
            resid = z2 - num / float(np.vdot(T, T).real)
            if best is None or resid < best:
                best, arg = resid, (r, az, float(el), v)
        oracle.append(arg)

    matched = sorted(est.estimates, key=lambda e: e.r)
    expect = sorted(oracle)
    for e, (r, az, el, v) in zip(matched, expect):
        assert e.r == pytest.approx(r, abs=1e-6)
        assert e.azimuth == pytest.approx(az, abs=1e-7)
        assert e.elevation == pytest.approx(el, abs=1e-8)
        assert e.velocity(cfg.fc, cfg.c) == pytest.approx(v, abs=1e-6)


def test_permutation_equivariance():
    cfg = small_cfg(Psen=96, P=256)
    t1 = Target(r=40.0, azimuth=0.7, elevation=0.5, v=2.0)
    t2 = Target(r=55.0, azimuth=1.5, elevation=0.9, v=-3.0)
    outs = []
    for targets in [(t1, t2), (t2, t1)]:
        modes, code, pilots, raw, per = setup(cfg, targets, snr_db=20.0, seed=5)
        est, _ = run_vcm_em(raw, cfg, modes, code, pilots, Q=2)
        outs.append(sorted((e.r, e.azimuth, e.elevation) for e in est.estimates))
    a, b = outs
    for (ra, aza, ela), (rb, azb, elb) in zip(a, b):
        assert ra == pytest.approx(rb, abs=1e-9)
        assert aza == pytest.approx(azb, abs=1e-12)
        assert ela == pytest.approx(elb, abs=1e-12)


def test_trace_monotone_and_noise_floor():
    cfg = small_cfg(Psen=96, P=256)
    t = Target(r=45.0, azimuth=0.9, elevation=0.6, v=4.0)
    snr = 10.0
    modes, code, pilots, raw, _ = setup(cfg, (t,), snr_db=snr, seed=8)
    est, trace = run_vcm_em(raw, cfg, modes, code, pilots, Q=1)
    nm = np.array(trace.nmse_db)
    assert np.all(np.diff(nm) <= 0.1)
    floor = -10.0 * math.log10(1.0 + 10.0 ** (snr / 10.0))
    assert abs(nm[-1] - floor) < 1.5
    assert len(trace.history) == len(nm)


def test_noise_split_weights_normalized():
    cfg = small_cfg()
    t = Target(r=45.0, azimuth=0.9, elevation=0.6, v=0.0)
    modes, code, pilots, raw, _ = setup(cfg, (t,))
    est, _ = run_vcm_em(raw, cfg, modes, code, pilots, Q=1)
    assert np.sum(est.noise_weights**2) == pytest.approx(1.0, abs=1e-12)


def test_static_cdmm_and_tdmm_agree_within_grid_cell():
    cfg = small_cfg(Psen=96, P=256)
    t = Target(r=45.3, azimuth=0.9, elevation=0.6, v=0.0)
    dq = derive_quantities(cfg)
    results = {}
    for variant, code in [("cdmm-vcmem", hadamard(2)), ("tdmm-baseline", identity_code(4))]:
        modes, code, pilots, raw, _ = setup(cfg, (t,), code=code, snr_db=20.0, seed=3)
        est, _ = run_vcm_em(raw, cfg, modes, code, pilots, Q=1, variant=variant)
        results[variant] = est.estimates[0]
    a, b = results["cdmm-vcmem"], results["tdmm-baseline"]
    assert abs(a.r - b.r) <= dq.range_resolution
    assert abs(a.azimuth - b.azimuth) <= 2 * math.pi / cfg.U
    assert abs(a.elevation - b.elevation) <= math.radians(0.5)


def test_requires_enough_symbols():
    cfg = small_cfg(Psen=2, P=256, U=4)
    modes = mode_set(cfg.M, cfg.U)
    with pytest.raises(ValueError):
        run_vcm_em(
            DataCube(values=np.ones((2, cfg.L), dtype=complex), stage="raw"),
            cfg, modes, hadamard(2), pilots_all_ones(2, cfg.L, 4), Q=1,
        )


def test_unknown_variant_rejected():
    cfg = small_cfg()
    with pytest.raises(ValueError):
        DecodePlan.for_variant("music", cfg, cfg.U)

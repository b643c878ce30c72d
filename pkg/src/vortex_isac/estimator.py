"""Multi-target parameter estimation with Doppler-consistent decoding.

The estimator alternates, per target: subtract the re-synthesized
contributions of all other targets from the raw cube, pick the compensation
velocity whose conditional re-estimate agrees with itself (consistency
matching over a velocity grid), conjugate-decode at that velocity, then
update range, Doppler, azimuth, elevation, and amplitude by 1-D matched
spectra / template searches.  Sweeps repeat until the normalized residual
stops improving.

Slow-time conventions: the code-division path decodes stride-1 windows
(slow-time step Tc, length Psen - U + 1); the time-division baseline
demultiplexes disjoint frames (step U*Tc, length Psen // U) and applies no
Doppler compensation, which reproduces the classical angle-Doppler bias.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .bessel import bessel_j_orders, bessel_jn_table
from .config import SystemConfig, derive_quantities
from .decode import conj_decode_cube, decode_cube, tdmm_frame_cube
from .echo import (
    DataCube,
    i_neg_pow,
    slow_time_vector,
    steering_matrix,
    synth_target_raw,
)
from .waveform import CodeMatrix, ModeSet, PilotPlan

VARIANTS = ("cdmm-vcmem", "cdmm-nocomp", "tdmm-baseline")

NMSE_FLOOR_DB = -300.0


@dataclass(frozen=True)
class ParameterEstimate:
    """One target's estimated tuple (amplitude, range, Doppler, angles)."""

    amplitude: complex
    r: float
    f_d: float
    azimuth: float
    elevation: float
    degenerate: bool = False

    def velocity(self, fc: float, c: float) -> float:
        return -self.f_d * c / (2.0 * fc)


@dataclass
class EstimateSet:
    """All Q estimates plus the uniform noise-split weights (sum beta^2 = 1)."""

    estimates: list[ParameterEstimate]
    noise_weights: np.ndarray

    @classmethod
    def uniform(cls, estimates: list[ParameterEstimate]) -> "EstimateSet":
        q = max(len(estimates), 1)
        return cls(estimates=list(estimates), noise_weights=np.full(len(estimates), 1.0 / math.sqrt(q)))


@dataclass
class IterationTrace:
    """Per-sweep normalized residual (dB) and parameter history."""

    nmse_db: list[float] = field(default_factory=list)
    history: list[list[ParameterEstimate]] = field(default_factory=list)
    converged: bool = False


@dataclass(frozen=True)
class SearchGrids:
    """Velocity / elevation grids and spectrum zero-padding factors."""

    velocity: np.ndarray   # m/s, monotone
    elevation: np.ndarray  # radians, monotone
    range_pad: int = 4
    azimuth_pad: int = 8
    doppler_pad: int = 8


def default_grids(
    cfg: SystemConfig,
    velocity_step: float = 0.05,
    elevation_step_deg: float = 0.25,
    elevation_lo_deg: float = 1.0,
    elevation_hi_deg: float = 89.0,
) -> SearchGrids:
    dq = derive_quantities(cfg)
    n = int(math.floor(dq.unambiguous_velocity / velocity_step))
    velocity = np.arange(-n, n + 1) * velocity_step
    n_el = int(round((elevation_hi_deg - elevation_lo_deg) / elevation_step_deg)) + 1
    elevation = np.radians(elevation_lo_deg + elevation_step_deg * np.arange(n_el))
    return SearchGrids(velocity=velocity, elevation=elevation)


class TemplateBank:
    """Precomputed steering ingredients shared across iterations and trials.

    Holds the subcarrier wavenumbers, the elevation-grid Bessel products
    B[t, l, u] = J_0(k_l R_r sin el_t) * J_{l_u}(k_l R_t sin el_t) and their
    squared norms, and the mode bookkeeping for azimuth spectra.
    """

    def __init__(self, cfg: SystemConfig, modes: ModeSet, grids: SearchGrids):
        self.cfg = cfg
        self.modes = modes
        self.grids = grids
        self.dq = derive_quantities(cfg)
        self.k_l = self.dq.subcarrier_wavenumbers
        self.i_neg = i_neg_pow(modes.modes)
        el = grids.elevation
        sin_el = np.sin(el)
        x_rx = self.k_l[None, :] * cfg.Rr * sin_el[:, None]          # (T, L)
        j0 = bessel_jn_table(0, x_rx)[0]                              # (T, L)
        x_tx = self.k_l[None, :] * cfg.Rt * sin_el[:, None]
        jl = bessel_j_orders(modes.modes, x_tx)                       # (U, T, L)
        self.bessel_products = np.ascontiguousarray(
            np.moveaxis(jl, 0, -1) * j0[:, :, None]
        )                                                             # (T, L, U)
        self.el_norm2 = np.einsum(
            "tlu,tlu->t", self.bessel_products, self.bessel_products
        )
        self.v_max = self.dq.unambiguous_velocity

    def steer(self, r: float, azimuth: float, elevation: float) -> np.ndarray:
        """Fresh (L, U) steering matrix at arbitrary (possibly off-grid) angles."""
        return steering_matrix(self.cfg, self.modes, r, azimuth, elevation)

    def bessel_at(self, elevation: float) -> np.ndarray:
        """J_0 * J_l products at one elevation, shape (L, U)."""
        sin_el = math.sin(elevation)
        j0 = bessel_jn_table(0, self.k_l * self.cfg.Rr * sin_el)[0]
        jl = bessel_j_orders(self.modes.modes, self.k_l * self.cfg.Rt * sin_el).T
        return j0[:, None] * jl

    def velocity_to_doppler(self, v) -> np.ndarray:
        return -2.0 * np.asarray(v) * self.cfg.fc / self.cfg.c


# ----------------------------------------------------------------------
# Peak handling
# ----------------------------------------------------------------------

def _parabolic_offset(y1: float, y2: float, y3: float) -> float:
    """Vertex offset in [-1, 1] of the parabola through three samples."""
    denom = y1 - 2.0 * y2 + y3
    if denom == 0.0:
        return 0.0
    delta = 0.5 * (y1 - y3) / denom
    if not math.isfinite(delta) or abs(delta) > 1.0:
        return 0.0
    return delta


def _peak_circular(mag: np.ndarray, mask: np.ndarray | None = None) -> tuple[int, float]:
    """Argmax plus parabolic refinement on a circular (FFT) magnitude array."""
    if mask is not None:
        idx = int(np.argmax(np.where(mask, mag, -np.inf)))
    else:
        idx = int(np.argmax(mag))
    n = mag.size
    y1, y2, y3 = mag[(idx - 1) % n], mag[idx], mag[(idx + 1) % n]
    return idx, _parabolic_offset(y1, y2, y3)


def _peak_linear(values: np.ndarray) -> tuple[int, float]:
    """Argmax plus parabolic refinement on a non-circular grid."""
    idx = int(np.argmax(values))
    if idx == 0 or idx == values.size - 1:
        return idx, 0.0
    return idx, _parabolic_offset(values[idx - 1], values[idx], values[idx + 1])


def _next_pow2(n: int) -> int:
    return 1 << max(int(n - 1).bit_length(), 0)


# ----------------------------------------------------------------------
# Residual bookkeeping and the normalized residual metric
# ----------------------------------------------------------------------

def resynth_estimate(
    cfg: SystemConfig,
    modes: ModeSet,
    code: CodeMatrix,
    pilots: PilotPlan,
    est: ParameterEstimate,
) -> np.ndarray:
    """Raw-domain reconstruction of one estimated target (code re-applied)."""
    return synth_target_raw(
        cfg, modes, code, pilots, est.r, est.azimuth, est.elevation, est.f_d, est.amplitude
    )


def nmse_db(raw_values: np.ndarray, model_values: np.ndarray | None) -> float:
    """10*log10(||raw - model||^2 / ||raw||^2), floored at -300 dB."""
    denom = float(np.vdot(raw_values, raw_values).real)
    if denom == 0.0:
        raise ValueError("reference cube has zero norm")
    resid = raw_values if model_values is None else raw_values - model_values
    num = float(np.vdot(resid, resid).real)
    if num == 0.0:
        return NMSE_FLOOR_DB
    return max(10.0 * math.log10(num / denom), NMSE_FLOOR_DB)


def residual_cube(
    raw: DataCube,
    cfg: SystemConfig,
    modes: ModeSet,
    code: CodeMatrix,
    pilots: PilotPlan,
    estimates: list[ParameterEstimate],
    q: int,
) -> np.ndarray:
    """Raw cube minus the re-synthesized contributions of all targets but q."""
    resid = raw.values.copy()
    for i, est in enumerate(estimates):
        if i != q:
            resid -= resynth_estimate(cfg, modes, code, pilots, est)
    return resid


# ----------------------------------------------------------------------
# Decoding plans (code-division sliding windows vs time-division frames)
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class DecodePlan:
    """How a raw residual becomes a decoded cube for estimation."""

    variant: str
    slow_dt: float
    n_slow: int
    compensate: bool  # conjugate-match the window ramp at the VCM velocity

    @classmethod
    def for_variant(cls, variant: str, cfg: SystemConfig, U: int) -> "DecodePlan":
        if variant not in VARIANTS:
            raise ValueError(f"unknown estimator variant {variant!r}")
        if variant == "tdmm-baseline":
            return cls(variant, cfg.Tc * U, cfg.Psen // U, compensate=False)
        n_slow = cfg.Psen - U + 1
        return cls(variant, cfg.Tc, n_slow, compensate=(variant == "cdmm-vcmem"))


def _decode_residual(
    resid: np.ndarray,
    code: CodeMatrix,
    pilots: PilotPlan,
    plan: DecodePlan,
    beta1: float,
    omega_star: complex = 1.0 + 0.0j,
) -> np.ndarray:
    """Decoded, amplitude-normalized cube of a raw-domain residual."""
    raw = DataCube(values=resid, stage="raw")
    if plan.variant == "tdmm-baseline":
        cube = tdmm_frame_cube(raw, code.U)
    elif omega_star == 1.0 + 0.0j:
        cube = decode_cube(raw, code, pilots)
    else:
        cube = conj_decode_cube(raw, code, omega_star, pilots)
    return cube.values / beta1


# ----------------------------------------------------------------------
# M-step: alternating 1-D updates
# ----------------------------------------------------------------------

def _range_update(Z, a, partial_template, cfg, pad) -> float:
    """Spectrum over the subcarrier axis; peak position in meters."""
    g = np.einsum("plu,p,lu->l", Z, np.conj(a), np.conj(partial_template))
    nfft = _next_pow2(pad * cfg.L)
    mag = np.abs(np.fft.fft(g, nfft))
    idx, delta = _peak_circular(mag)
    r = (idx + delta) * cfg.c / (2.0 * cfg.df * nfft)
    return float(r % (cfg.c / (2.0 * cfg.df)))


def _doppler_update(Z, template, bank, plan, pad) -> float | None:
    """Spectrum over the decoded slow-time axis; returns f_D or None to keep."""
    n_slow = Z.shape[0]
    if n_slow < 4:
        return None
    g = np.einsum("plu,lu->p", Z, np.conj(template))
    nfft = _next_pow2(pad * n_slow)
    spec = np.abs(np.fft.fft(g, nfft))
    freqs = np.fft.fftfreq(nfft)  # cycles per slow-time sample
    f_d_axis = -freqs / plan.slow_dt
    v_axis = -f_d_axis * bank.cfg.c / (2.0 * bank.cfg.fc)
    mask = np.abs(v_axis) <= bank.v_max * 1.0001
    idx, delta = _peak_circular(spec, mask)
    frac = (freqs[idx] + delta / nfft)
    return float(-frac / plan.slow_dt)


def _azimuth_update(Z, a, partial_template, modes: ModeSet, pad) -> float:
    """Spectrum over the mode axis; peak position as azimuth in [0, 2*pi)."""
    g = np.einsum("plu,p,lu->u", Z, np.conj(a), np.conj(partial_template))
    K = _next_pow2(pad * modes.U)
    buf = np.zeros(K, dtype=complex)
    buf[np.asarray(modes.modes) % K] = g
    mag = np.abs(np.fft.fft(buf))
    idx, delta = _peak_circular(mag)
    return float((2.0 * np.pi * (idx + delta) / K) % (2.0 * np.pi))


def _elevation_update(Z, a, r, azimuth, bank: TemplateBank) -> float:
    """Grid minimization of the template residual over the elevation grid.

    The per-elevation amplitude is profiled out, so the minimized residual
    corresponds to maximizing |<T, Z>|^2 / ||T||^2; a parabolic refinement
    is applied unless the best grid point already fits to machine precision.
    """
    h = np.einsum("plu,p->lu", Z, np.conj(a))
    phase = np.exp(2j * bank.k_l * r)[:, None] * (
        np.exp(1j * azimuth * bank.modes.modes) * bank.i_neg
    )[None, :]
    hw = np.conj(phase) * h
    corr = np.einsum("tlu,lu->t", bank.bessel_products, hw)
    score = np.abs(corr) ** 2 / np.maximum(bank.el_norm2, 1e-300)
    t = int(np.argmax(score))
    el = bank.grids.elevation
    # perfect-fit guard: an exact on-grid template leaves nothing to refine
    # (threshold leaves 3 orders of margin below genuine off-grid deficits)
    z_norm2 = float(np.vdot(Z, Z).real)
    match = score[t] / Z.shape[0]  # |<T, Z>|^2 / ||T||^2
    if z_norm2 > 0 and (1.0 - min(match / z_norm2, 1.0)) < 1e-9:
        return float(el[t])
    if 0 < t < el.size - 1:
        delta = _parabolic_offset(score[t - 1], score[t], score[t + 1])
    else:
        delta = 0.0
    step = el[1] - el[0] if el.size > 1 else 0.0
    return float(el[t] + delta * step)


def _amplitude_update(Z, a, template) -> complex:
    """Closed-form complex least squares against the unit template."""
    num = np.einsum("plu,p,lu->", Z, np.conj(a), np.conj(template))
    den = float(np.vdot(template, template).real) * a.size
    if den == 0.0:
        return 0.0 + 0.0j
    return complex(num / den)


def m_step(
    Z: np.ndarray,
    bank: TemplateBank,
    prev: ParameterEstimate,
    plan: DecodePlan,
) -> ParameterEstimate:
    """Alternating updates: range, Doppler, azimuth, elevation, amplitude."""
    if not np.any(Z):
        return ParameterEstimate(
            amplitude=prev.amplitude, r=prev.r, f_d=prev.f_d,
            azimuth=prev.azimuth, elevation=prev.elevation, degenerate=True,
        )
    cfg, modes, grids = bank.cfg, bank.modes, bank.grids
    n_slow = Z.shape[0]
    a = slow_time_vector(prev.f_d, n_slow, plan.slow_dt)

    mode_part = np.exp(1j * prev.azimuth * modes.modes) * bank.i_neg
    bes = bank.bessel_at(prev.elevation)
    r_hat = _range_update(Z, a, mode_part[None, :] * bes, cfg, grids.range_pad)

    template = bank.steer(r_hat, prev.azimuth, prev.elevation)
    f_d = _doppler_update(Z, template, bank, plan, grids.doppler_pad)
    if f_d is None:
        f_d = prev.f_d
    a = slow_time_vector(f_d, n_slow, plan.slow_dt)

    range_part = (np.exp(2j * bank.k_l * r_hat) / r_hat**2)[:, None]
    az_hat = _azimuth_update(
        Z, a, range_part * bank.i_neg[None, :] * bes, modes, grids.azimuth_pad
    )

    el_hat = _elevation_update(Z, a, r_hat, az_hat, bank)

    template = bank.steer(r_hat, az_hat, el_hat)
    amp = _amplitude_update(Z, a, template)
    return ParameterEstimate(
        amplitude=amp, r=r_hat, f_d=f_d, azimuth=az_hat, elevation=el_hat
    )


# ----------------------------------------------------------------------
# Velocity-consistency matching (the compensation-velocity search)
# ----------------------------------------------------------------------

def vcm_velocity(
    resid: np.ndarray,
    code: CodeMatrix,
    pilots: PilotPlan,
    bank: TemplateBank,
    prev: ParameterEstimate,
    plan: DecodePlan,
) -> float:
    """Pick the compensation velocity that agrees with its own re-estimate.

    For every candidate v* the residual is conjugate-decoded at the matching
    window ramp, collapsed onto the previous template, and the slow-time
    spectrum peak gives the conditional estimate v_hat(v*); the returned
    velocity minimizes |v* - v_hat(v*)| with ties broken toward smaller |v*|.

    The per-candidate decode uses the absolute-symbol factorization of the
    window ramp, so the whole grid costs one template collapse plus a batch
    of length-U moving sums and FFTs.
    """
    n = resid.shape[0]
    U = code.U
    n_slow = n - U + 1
    if n_slow < 4:
        return prev.velocity(bank.cfg.fc, bank.cfg.c)
    vgrid = bank.grids.velocity
    template = bank.steer(prev.r, prev.azimuth, prev.elevation)

    rows = code.W[np.arange(n) % U]  # (n, U)
    if pilots.rule != "all-ones":
        e = np.einsum(
            "jl,jlu,ju,lu->j", resid, np.conj(pilots.values[:n]), rows, np.conj(template)
        )
    else:
        # B[row, l] = sum_u W[row, u] * conj(template[l, u]) over the U code rows
        B = np.einsum("ru,lu->rl", code.W, np.conj(template))
        e = np.einsum("jl,jl->j", resid, B[np.arange(n) % U])

    f_star = bank.velocity_to_doppler(vgrid)                  # (V,)
    psi = 2.0 * np.pi * f_star * bank.cfg.Tc                  # window ramp angle
    j = np.arange(n)
    d = e[None, :] * np.exp(1j * np.outer(psi, j))            # conj(w*)^j
    msum = sliding_window_view(d, U, axis=1).sum(axis=-1)     # (V, n_slow)
    p0 = np.arange(n_slow)
    g = np.exp(-1j * np.outer(psi, p0)) * msum

    nfft = _next_pow2(bank.grids.doppler_pad * n_slow)
    spec = np.abs(np.fft.fft(g, nfft, axis=1))
    freqs = np.fft.fftfreq(nfft)
    v_axis = -(-freqs / plan.slow_dt) * bank.cfg.c / (2.0 * bank.cfg.fc)
    mask = np.abs(v_axis) <= bank.v_max * 1.0001

    v_fit = np.empty(vgrid.size)
    spec_masked = np.where(mask[None, :], spec, -np.inf)
    peak_idx = np.argmax(spec_masked, axis=1)
    for i, idx in enumerate(peak_idx):
        y1 = spec[i, (idx - 1) % nfft]
        y3 = spec[i, (idx + 1) % nfft]
        delta = _parabolic_offset(y1, spec[i, idx], y3)
        frac = freqs[idx] + delta / nfft
        v_fit[i] = frac * bank.cfg.c / (2.0 * bank.cfg.fc * plan.slow_dt)

    err = np.round(np.abs(vgrid - v_fit), 9)
    order = np.lexsort((vgrid, np.abs(vgrid), err))
    return float(vgrid[order[0]])


def e_step(
    resid: np.ndarray,
    code: CodeMatrix,
    pilots: PilotPlan,
    plan: DecodePlan,
    beta1: float,
    f_d: float,
    Tc: float,
) -> np.ndarray:
    """Conjugate-matched decode of the residual at the selected Doppler."""
    omega = complex(np.exp(-2j * np.pi * f_d * Tc))
    if plan.variant != "cdmm-vcmem":
        omega = 1.0 + 0.0j
    return _decode_residual(resid, code, pilots, plan, beta1, omega)


# ----------------------------------------------------------------------
# Initialization: successive cancellation from range-Doppler maps
# ----------------------------------------------------------------------

def _range_doppler_boot(
    Z,
    bank: TemplateBank,
    plan: DecodePlan,
    cfg,
    claimed: list[tuple[float, float]] | None = None,
) -> tuple[float, float]:
    """Coarse (r, v) from per-mode 2-D spectra, summed incoherently.

    ``claimed`` holds (r, v) cells already assigned to earlier extraction
    passes; a small guard zone around each is excluded so that subtraction
    leftovers cannot be re-detected as new targets.
    """
    n_slow, L, U = Z.shape
    nfft_r = _next_pow2(4 * L)
    nfft_v = _next_pow2(max(4 * n_slow, 8))
    rd = np.zeros((nfft_v, nfft_r))
    for u in range(U):
        rd += np.abs(np.fft.fft2(Z[:, :, u], s=(nfft_v, nfft_r))) ** 2
    freqs = np.fft.fftfreq(nfft_v)
    v_axis = freqs * cfg.c / (2.0 * cfg.fc * plan.slow_dt)
    vmask = np.abs(v_axis) <= bank.v_max * 1.0001
    rd_masked = np.where(vmask[:, None], rd, -np.inf)
    if claimed:
        r_axis = np.arange(nfft_r) * cfg.c / (2.0 * cfg.df * nfft_r)
        r_guard = 2.0 * bank.dq.range_resolution
        v_guard = 2.0 * bank.dq.wavelength / (2.0 * n_slow * plan.slow_dt)
        for r_c, v_c in claimed:
            cell = (np.abs(v_axis[:, None] - v_c) < v_guard) & (
                np.abs(r_axis[None, :] - r_c) < r_guard
            )
            rd_masked = np.where(cell, -np.inf, rd_masked)
    iv, ir = np.unravel_index(int(np.argmax(rd_masked)), rd.shape)
    dv = _parabolic_offset(
        rd[(iv - 1) % nfft_v, ir], rd[iv, ir], rd[(iv + 1) % nfft_v, ir]
    )
    dr = _parabolic_offset(
        rd[iv, (ir - 1) % nfft_r], rd[iv, ir], rd[iv, (ir + 1) % nfft_r]
    )
    r0 = (ir + dr) * cfg.c / (2.0 * cfg.df * nfft_r) % (cfg.c / (2.0 * cfg.df))
    frac = freqs[iv] + dv / nfft_v
    v0 = frac * cfg.c / (2.0 * cfg.fc * plan.slow_dt)
    return float(r0), float(v0)


def _angle_boot(Z, bank: TemplateBank, r0: float, f_d0: float, plan: DecodePlan) -> tuple[float, float]:
    """Joint azimuth/elevation matched filter on the mode axis."""
    n_slow = Z.shape[0]
    a = slow_time_vector(f_d0, n_slow, plan.slow_dt)
    h = np.einsum("plu,p->lu", Z, np.conj(a))
    hw = np.conj(np.exp(2j * bank.k_l * r0))[:, None] * np.conj(bank.i_neg)[None, :] * h
    m_t = np.einsum("tlu,lu->tu", bank.bessel_products, hw)  # (T, U)
    K = _next_pow2(bank.grids.azimuth_pad * bank.modes.U)
    buf = np.zeros((m_t.shape[0], K), dtype=complex)
    buf[:, np.asarray(bank.modes.modes) % K] = m_t
    S = np.abs(np.fft.fft(buf, axis=1)) ** 2 / np.maximum(bank.el_norm2, 1e-300)[:, None]
    t, jphi = np.unravel_index(int(np.argmax(S)), S.shape)
    el_grid = bank.grids.elevation
    dphi = _parabolic_offset(S[t, (jphi - 1) % K], S[t, jphi], S[t, (jphi + 1) % K])
    if 0 < t < el_grid.size - 1:
        dt_el = _parabolic_offset(S[t - 1, jphi], S[t, jphi], S[t + 1, jphi])
    else:
        dt_el = 0.0
    az0 = (2.0 * np.pi * (jphi + dphi) / K) % (2.0 * np.pi)
    step = el_grid[1] - el_grid[0] if el_grid.size > 1 else 0.0
    return float(az0), float(el_grid[t] + dt_el * step)


def init_estimates(
    raw: DataCube,
    cfg: SystemConfig,
    modes: ModeSet,
    code: CodeMatrix,
    pilots: PilotPlan,
    Q: int,
    bank: TemplateBank,
    plan: DecodePlan,
) -> list[ParameterEstimate]:
    """Successive-cancellation bootstrap: extract Q coarse targets.

    Each pass decodes the running residual, reads a coarse (range, velocity)
    off the per-mode range-Doppler maps (skipping a guard zone around cells
    claimed by earlier passes), re-decodes conjugate-matched at that
    velocity where the variant compensates, matches azimuth/elevation
    templates, polishes with one M-step pass, then subtracts the
    re-synthesized target.  Over-specified Q lands the extra passes on
    noise peaks, which later sweeps are free to refine.
    """
    resid = raw.values.copy()
    ests: list[ParameterEstimate] = []
    claimed: list[tuple[float, float]] = []
    for _ in range(Q):
        Z = _decode_residual(resid, code, pilots, plan, cfg.beta1)
        r0, v0 = _range_doppler_boot(Z, bank, plan, cfg, claimed)
        claimed.append((r0, v0))
        f_d0 = float(bank.velocity_to_doppler(v0))
        if plan.compensate:
            Z = e_step(resid, code, pilots, plan, cfg.beta1, f_d0, cfg.Tc)
        az0, el0 = _angle_boot(Z, bank, r0, f_d0, plan)
        a = slow_time_vector(f_d0, Z.shape[0], plan.slow_dt)
        template = bank.steer(r0, az0, el0)
        amp0 = _amplitude_update(Z, a, template)
        est = ParameterEstimate(amplitude=amp0, r=r0, f_d=f_d0, azimuth=az0, elevation=el0)
        est = m_step(Z, bank, est, plan)
        ests.append(est)
        resid = resid - resynth_estimate(cfg, modes, code, pilots, est)
    return ests


# ----------------------------------------------------------------------
# The full loop
# ----------------------------------------------------------------------

def run_vcm_em(
    raw: DataCube,
    cfg: SystemConfig,
    modes: ModeSet,
    code: CodeMatrix,
    pilots: PilotPlan,
    Q: int,
    grids: SearchGrids | None = None,
    max_iter: int = 20,
    tol: float = 1e-4,
    variant: str = "cdmm-vcmem",
    bank: TemplateBank | None = None,
) -> tuple[EstimateSet, IterationTrace]:
    """Iterate successive cancellation + consistency matching to convergence.

    Returns the Q estimates and the per-sweep residual trace.  The trace is
    non-increasing by construction: a target's update is kept only when it
    does not worsen the raw-domain residual.
    """
    if Q < 1:
        return EstimateSet.uniform([]), IterationTrace(converged=True)
    if cfg.Psen < code.U:
        raise ValueError(f"need Psen >= U, got Psen={cfg.Psen}, U={code.U}")
    grids = grids if grids is not None else default_grids(cfg)
    bank = bank if bank is not None else TemplateBank(cfg, modes, grids)
    plan = DecodePlan.for_variant(variant, cfg, code.U)

    ests = init_estimates(raw, cfg, modes, code, pilots, Q, bank, plan)
    models = [resynth_estimate(cfg, modes, code, pilots, e) for e in ests]

    trace = IterationTrace()
    prev_nmse_lin = None
    for _ in range(max_iter):
        for q in range(Q):
            others = raw.values - (np.sum(models, axis=0) - models[q])
            prev = ests[q]
            if plan.compensate:
                v_star = vcm_velocity(others, code, pilots, bank, prev, plan)
                f_d_comp = float(bank.velocity_to_doppler(v_star))
            else:
                f_d_comp = prev.f_d
            Z = e_step(others, code, pilots, plan, cfg.beta1, f_d_comp, cfg.Tc)
            if plan.compensate:
                prev = ParameterEstimate(
                    amplitude=prev.amplitude, r=prev.r, f_d=f_d_comp,
                    azimuth=prev.azimuth, elevation=prev.elevation,
                )
            cand = m_step(Z, bank, prev, plan)
            cand_model = resynth_estimate(cfg, modes, code, pilots, cand)
            old_res = others - models[q]
            new_res = others - cand_model
            if float(np.vdot(new_res, new_res).real) <= float(np.vdot(old_res, old_res).real):
                ests[q] = cand
                models[q] = cand_model
        total = np.sum(models, axis=0)
        trace.nmse_db.append(nmse_db(raw.values, total))
        trace.history.append(list(ests))
        nmse_lin = 10.0 ** (trace.nmse_db[-1] / 10.0)
        if prev_nmse_lin is not None:
            rel = abs(prev_nmse_lin - nmse_lin) / max(prev_nmse_lin, 1e-300)
            if rel < tol:
                trace.converged = True
                break
        prev_nmse_lin = nmse_lin
    if not trace.converged:
        warnings.warn(
            f"estimation did not converge within {max_iter} sweeps; returning best-so-far",
            stacklevel=2,
        )
    return EstimateSet.uniform(ests), trace

"""System configuration, target scenarios, and derived radar quantities.

Everything downstream (waveform generation, echo synthesis, decoding,
estimation, and the communication link) reads its geometry and frame
parameters from here.  All angles are stored in radians; degrees are
accepted only at the JSON file boundary.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 2.99792458e8


class ConfigError(ValueError):
    """A configuration or scenario violates one of its invariants."""


@dataclass(frozen=True)
class SystemConfig:
    """Radio, array, and frame parameterization of the integrated system.

    Attributes
    ----------
    fc : float
        Carrier frequency (Hz).
    df : float
        Subcarrier spacing (Hz).
    L : int
        Number of subcarriers.
    P : int
        OFDM symbols per coherent processing interval.
    Psen : int
        Leading symbols of the CPI used for sensing (Psen <= P).
    Tc : float
        OFDM symbol duration (s), Tc >= 1/df.
    M, N : int
        Tx / radar-Rx circular-array element counts (M == N).
    Rt, Rr, Rr_ue : float or None
        Radii (m) of the Tx, radar-Rx, and UE-Rx circular arrays.
        ``None`` selects the spatial anti-aliasing bound M*lambda/(4*pi).
    U : int
        Number of simultaneously multiplexed vortex modes (U <= M).
    beta : float
        Combined antenna constant (beta_t * beta_r collapsed into one scalar).
    c : float
        Propagation speed (m/s).
    snr_db : float
        Receive SNR used when noise is added to synthesized echoes.
    """

    fc: float
    df: float
    L: int
    P: int
    Psen: int
    Tc: float
    M: int = 16
    N: int = 16
    Rt: float | None = None
    Rr: float | None = None
    Rr_ue: float | None = None
    U: int = 16
    beta: float = 1.0
    c: float = SPEED_OF_LIGHT
    snr_db: float = 15.0

    def __post_init__(self):
        lam = self.c / self.fc
        r_bound = self.M * lam / (4.0 * math.pi)
        for name in ("Rt", "Rr", "Rr_ue"):
            if getattr(self, name) is None:
                object.__setattr__(self, name, r_bound)
        self.validate()

    def validate(self):
        for name in ("L", "P", "Psen", "M", "N", "U"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.Tc < 1.0 / self.df:
            raise ConfigError(
                f"symbol duration Tc={self.Tc:g} shorter than 1/df={1.0 / self.df:g}"
            )
        if self.Psen > self.P:
            raise ConfigError(f"Psen={self.Psen} exceeds P={self.P}")
        if self.U > self.M:
            raise ConfigError(f"U={self.U} exceeds M={self.M}")
        if self.M != self.N:
            raise ConfigError(f"M={self.M} != N={self.N} (only M == N is modeled)")
        lam = self.c / self.fc
        r_bound = self.M * lam / (4.0 * math.pi)
        if self.Rt > r_bound * (1.0 + 1e-12):
            raise ConfigError(
                f"Rt={self.Rt:g} exceeds spatial anti-aliasing bound "
                f"M*lambda/(4*pi)={r_bound:g}"
            )
        for name in ("fc", "df", "Tc", "Rt", "Rr", "Rr_ue", "beta", "c"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")

    @property
    def beta1(self) -> float:
        """Combined two-way array constant beta * M * N."""
        return self.beta * self.M * self.N


@dataclass(frozen=True)
class Target:
    """One point scatterer: spherical position, radial velocity, reflectivity.

    ``azimuth`` in [0, 2*pi); ``elevation`` is the polar angle from the
    array boresight, in (0, pi/2).  ``reflectivity`` is a real positive
    amplitude (the estimator's amplitude is complex to absorb residual
    phase, but ground truth is real).
    """

    r: float
    azimuth: float
    elevation: float
    v: float = 0.0
    reflectivity: float = 1.0


@dataclass(frozen=True)
class Scenario:
    """A list of targets plus which one carries the communication receiver."""

    targets: tuple[Target, ...]
    comm_target_index: int = 0
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.targets and not (0 <= self.comm_target_index < len(self.targets)):
            raise ConfigError(
                f"comm_target_index={self.comm_target_index} out of range "
                f"for {len(self.targets)} targets"
            )


@dataclass(frozen=True)
class DerivedQuantities:
    """Closed-form radar quantities derived from a SystemConfig."""

    wavelength: float
    unambiguous_range: float
    range_resolution: float
    unambiguous_velocity: float
    velocity_resolution: float
    subcarrier_wavenumbers: np.ndarray  # k_l, shape (L,), strictly increasing
    element_azimuths_tx: np.ndarray     # phi_m, shape (M,)
    element_azimuths_rx: np.ndarray     # alpha_n, shape (N,)


def derive_quantities(cfg: SystemConfig) -> DerivedQuantities:
    """Compute wavelength, ambiguity windows, resolutions, and array geometry.

    Pure function: identical configs give bit-identical outputs.
    """
    cfg.validate()
    lam = cfg.c / cfg.fc
    bandwidth = cfg.L * cfg.df
    f_l = (np.arange(cfg.L, dtype=float)) * cfg.df  # f_l = (l-1)*df, l = 1..L
    k_l = 2.0 * np.pi * (cfg.fc + f_l) / cfg.c
    return DerivedQuantities(
        wavelength=lam,
        unambiguous_range=cfg.c / (2.0 * cfg.df),
        range_resolution=cfg.c / (2.0 * bandwidth),
        unambiguous_velocity=lam / (4.0 * cfg.Tc * cfg.M),
        velocity_resolution=lam / (2.0 * cfg.Psen * cfg.Tc),
        subcarrier_wavenumbers=k_l,
        element_azimuths_tx=2.0 * np.pi * np.arange(cfg.M) / cfg.M,
        element_azimuths_rx=2.0 * np.pi * np.arange(cfg.N) / cfg.N,
    )


def validate_scenario(cfg: SystemConfig, scenario: Scenario) -> list[str]:
    """Check a scenario against the config's unambiguous windows.

    Returns a list of warning strings for targets outside the unambiguous
    range/velocity windows and for mode sets touching the distortion bound
    |l| >= M/2.  Raises ConfigError only for physically invalid targets
    (r <= 0 or elevation outside (0, pi/2)).  Inputs are never mutated.
    """
    dq = derive_quantities(cfg)
    notes: list[str] = []
    for i, t in enumerate(scenario.targets):
        if t.r <= 0:
            raise ConfigError(f"target {i}: range {t.r:g} m is not positive")
        if not (0.0 < t.elevation < np.pi / 2):
            raise ConfigError(
                f"target {i}: elevation {t.elevation:g} rad outside (0, pi/2)"
            )
        if t.r >= dq.unambiguous_range:
            notes.append(
                f"target {i}: range {t.r:g} m >= unambiguous range "
                f"{dq.unambiguous_range:.2f} m; range estimate will alias"
            )
        if abs(t.v) >= dq.unambiguous_velocity:
            notes.append(
                f"target {i}: |v| = {abs(t.v):g} m/s >= unambiguous velocity "
                f"{dq.unambiguous_velocity:.3f} m/s; velocity estimate will alias"
            )
    # Default mode set l_u = u - 1 - floor(U/2); largest magnitude is U//2.
    max_abs_mode = max(cfg.U // 2, abs(cfg.U - 1 - cfg.U // 2))
    if max_abs_mode >= cfg.M / 2:
        notes.append(
            f"mode set for U={cfg.U} reaches |l|={max_abs_mode} >= M/2={cfg.M / 2:g}; "
            "the outermost mode is distorted by the discrete array"
        )
    return notes


# ----------------------------------------------------------------------
# JSON file boundary (angles in degrees on disk, radians in memory)
# ----------------------------------------------------------------------

_CONFIG_KEYS = (
    "fc", "df", "L", "P", "Psen", "Tc", "M", "N",
    "Rt", "Rr", "Rr_ue", "U", "beta", "c", "snr_db",
)


def config_from_dict(d: dict) -> SystemConfig:
    unknown = set(d) - set(_CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown system config keys: {sorted(unknown)}")
    return SystemConfig(**d)


def scenario_from_dict(d: dict) -> Scenario:
    targets = []
    for i, t in enumerate(d.get("targets", [])):
        try:
            targets.append(
                Target(
                    r=float(t["range_m"]),
                    azimuth=math.radians(float(t["azimuth_deg"])),
                    elevation=math.radians(float(t["elevation_deg"])),
                    v=float(t.get("velocity_mps", 0.0)),
                    reflectivity=float(t.get("reflectivity", 1.0)),
                )
            )
        except KeyError as e:
            raise ConfigError(f"target {i}: missing field {e}") from e
    return Scenario(
        targets=tuple(targets),
        comm_target_index=int(d.get("comm_target_index", 0)),
        rng_seed=int(d.get("rng_seed", 0)),
    )


def load_run_file(path) -> tuple[SystemConfig, Scenario]:
    """Load a JSON file holding {"system": {...}, "scenario": {...}}."""
    with open(path) as f:
        doc = json.load(f)
    if "system" not in doc:
        raise ConfigError(f"{path}: missing top-level 'system' object")
    cfg = config_from_dict(doc["system"])
    scenario = scenario_from_dict(doc.get("scenario", {"targets": []}))
    return cfg, scenario


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "targets": [
            {
                "range_m": t.r,
                "azimuth_deg": math.degrees(t.azimuth),
                "elevation_deg": math.degrees(t.elevation),
                "velocity_mps": t.v,
                "reflectivity": t.reflectivity,
            }
            for t in scenario.targets
        ],
        "comm_target_index": scenario.comm_target_index,
        "rng_seed": scenario.rng_seed,
    }


def config_to_dict(cfg: SystemConfig) -> dict:
    return {k: getattr(cfg, k) for k in _CONFIG_KEYS}


def run_hash(cfg: SystemConfig, scenario: Scenario) -> str:
    """Short stable hash of (config, scenario) for CSV metadata lines."""
    blob = json.dumps(
        {"system": config_to_dict(cfg), "scenario": scenario_to_dict(scenario)},
        sort_keys=True,
    ).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def table1_config(**overrides) -> SystemConfig:
    """The default millimeter-wave configuration used throughout the demos."""
    base = dict(
        fc=77e9, df=1.5625e6, L=128, P=1024, Psen=512,
        Tc=6.67e-6, M=16, N=16, U=16, snr_db=15.0,
    )
    base.update(overrides)
    return SystemConfig(**base)

"""Slow-time decoding of raw echoes into per-mode cubes.

A window of U consecutive symbols starting at symbol p is correlated with
the cyclically arranged code rows; target motion multiplies the window by a
rank-one Vandermonde phase ramp, which turns the ideal decode into the
interference matrix H = W_p^T (W_p . Omega) / gram.  Conjugate-matching the
decoder against a candidate Doppler phasor cancels that ramp exactly for a
matched target.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .echo import DataCube
from .waveform import CodeMatrix, PilotPlan, window_code, window_rows


def vandermonde_disturbance(omega: complex, U: int) -> np.ndarray:
    """Rank-one window Doppler ramp: entry (k, j) = omega**k (0-based rows)."""
    col = omega ** np.arange(U)
    return np.tile(col[:, None], (1, U))


def interference_matrix(code: CodeMatrix, p: int, omega: complex) -> np.ndarray:
    """Cross-mode leakage H(i, j) = sum_k W_p[k,i] W_p[k,j] omega**(k-1) / gram.

    omega = 1 gives the identity exactly.  For +-1 codes the diagonal has
    the closed form (1 - omega**U) / (U * (1 - omega)), independent of p.
    """
    Wp = window_code(code, p)
    ramp = omega ** np.arange(code.U)
    return (Wp.T * ramp) @ Wp / code.gram


def interference_diag(U: int, omega: complex) -> complex:
    """Closed-form diagonal of the interference matrix for +-1 codes."""
    if omega == 1:
        return 1.0 + 0.0j
    return (1.0 - omega**U) / (U * (1.0 - omega))


def decode_window(raw: DataCube, code: CodeMatrix, p: int, l: int) -> np.ndarray:
    """Decode the U modes from symbols p .. p+U-1 on subcarrier l (1-based).

    z = W_p^T y / gram with W_p the window arrangement of the code rows.
    For a static single target this recovers the ideal per-mode echo to
    machine precision.
    """
    U = code.U
    if p < 1 or p + U - 1 > raw.values.shape[0]:
        raise ValueError(
            f"window [{p}, {p + U - 1}] exceeds the {raw.values.shape[0]} sensing symbols"
        )
    y = raw.values[p - 1 : p - 1 + U, l - 1]
    return window_code(code, p).T @ y / code.gram


def conjugate_decode(
    raw: DataCube, code: CodeMatrix, p: int, l: int, omega_star: complex
) -> np.ndarray:
    """Doppler-compensated window decode z = (W_p^T . Omega(omega*)^H) y / gram.

    When the window contains exactly one target whose per-symbol phasor
    equals omega*, the ramp cancels and z equals the ideal mode echo.
    """
    U = code.U
    if p < 1 or p + U - 1 > raw.values.shape[0]:
        raise ValueError("window exceeds the sensing symbols")
    y = raw.values[p - 1 : p - 1 + U, l - 1]
    ramp = np.conj(omega_star) ** np.arange(U)
    return (window_code(code, p).T * ramp) @ y / code.gram


def _per_symbol_products(
    raw_values: np.ndarray, code: CodeMatrix, pilots: PilotPlan | None
) -> np.ndarray:
    """c[j, l, u] = w(<j>_U, u) * conj(s_u(j, l)) * y(j, l) for 0-based j."""
    n = raw_values.shape[0]
    rows = code.W[np.arange(n) % code.U]  # (n, U)
    c = raw_values[:, :, None] * rows[:, None, :]
    if pilots is not None and pilots.rule != "all-ones":
        c = c * np.conj(pilots.values[:n])
    return c


def decode_cube(
    raw: DataCube, code: CodeMatrix, pilots: PilotPlan | None = None
) -> DataCube:
    """Sliding-window decode with stride 1 over p = 1 .. Psen - U + 1.

    Output shape (Psen - U + 1, L, U).  Overlapping windows correlate the
    decoded noise across slow time; estimation uses matched filtering, so
    whiteness is not required.
    """
    n = raw.values.shape[0]
    U = code.U
    if n < U:
        raise ValueError(f"need at least U={U} symbols, got {n}")
    c = _per_symbol_products(raw.values, code, pilots)
    z = sliding_window_view(c, U, axis=0).sum(axis=-1) / code.gram
    return DataCube(values=z, stage="decoded")


def conj_decode_cube(
    raw: DataCube,
    code: CodeMatrix,
    omega_star: complex,
    pilots: PilotPlan | None = None,
) -> DataCube:
    """Conjugate-matched sliding decode of the whole cube at one phasor.

    Uses the factorization conj(w*)**k = conj(w*)**j * w***p over absolute
    symbol index j = p + k, so one phase ramp serves every window.
    """
    n = raw.values.shape[0]
    U = code.U
    if n < U:
        raise ValueError(f"need at least U={U} symbols, got {n}")
    ang = float(np.angle(omega_star))
    c = _per_symbol_products(raw.values, code, pilots)
    d = c * np.exp(-1j * ang * np.arange(n))[:, None, None]
    msum = sliding_window_view(d, U, axis=0).sum(axis=-1)
    pre = np.exp(1j * ang * np.arange(msum.shape[0]))
    z = pre[:, None, None] * msum / code.gram
    return DataCube(values=z, stage="decoded")


def tdmm_frame_cube(raw: DataCube, U: int) -> DataCube:
    """Demultiplex identity-coded symbols into disjoint U-symbol frames.

    Frame f collects the U consecutive symbols (f-1)*U+1 .. f*U; mode u's
    sample is the raw symbol whose cyclic index is u.  The slow-time axis
    is the frame index with sampling interval U*Tc.
    """
    n, L = raw.values.shape
    frames = n // U
    if frames < 1:
        raise ValueError(f"need at least U={U} symbols for one frame")
    z = raw.values[: frames * U].reshape(frames, U, L).transpose(0, 2, 1)
    return DataCube(values=z.copy(), stage="decoded")

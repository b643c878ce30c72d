"""Mode sets, slow-time orthogonal codes, and per-antenna precoding.

The transmitter multiplexes U vortex modes onto every OFDM symbol.  Symbol p
is weighted by row <p>_U of a scaled-orthogonal code matrix W; the Hadamard
family gives true code-division multiplexing, the identity code degenerates
to one mode per symbol (time-division).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


def cyclic_index(p: int, U: int) -> int:
    """<p>_U = ((p - 1) mod U) + 1 for a 1-based symbol index p."""
    return (p - 1) % U + 1


@dataclass(frozen=True)
class ModeSet:
    """The U vortex mode numbers l_u carried by the array, ascending."""

    modes: np.ndarray  # (U,) int

    def __post_init__(self):
        m = np.asarray(self.modes, dtype=int)
        object.__setattr__(self, "modes", m)
        if len(np.unique(m)) != m.size:
            raise ValueError("mode numbers must be distinct")

    @property
    def U(self) -> int:
        return int(self.modes.size)


def mode_set(M: int, U: int) -> ModeSet:
    """Default mode assignment l_u = u - 1 - floor(U/2), u = 1..U.

    Odd U gives a symmetric set; even U spans -U/2 .. U/2 - 1 (keeps U a
    power of two for Hadamard coding while staying closest to the |l| < M/2
    distortion bound).  A warning is emitted when the bound is touched.
    """
    if not (1 <= U <= M):
        raise ValueError(f"need 1 <= U <= M, got U={U}, M={M}")
    modes = np.arange(1, U + 1) - 1 - U // 2
    if np.abs(modes).max() >= M / 2:
        warnings.warn(
            f"mode set reaches |l| = {int(np.abs(modes).max())} >= M/2 = {M / 2:g}; "
            "the outermost mode is distorted by the discrete array",
            stacklevel=2,
        )
    return ModeSet(modes)


@dataclass(frozen=True)
class CodeMatrix:
    """A U x U real slow-time code with W^T W = gram * I.

    gram is U for Hadamard (entries +-1) and 1 for the identity code.
    """

    W: np.ndarray
    kind: str  # "hadamard" | "identity" | "custom"
    gram: float

    @property
    def U(self) -> int:
        return int(self.W.shape[0])


def hadamard(kappa: int) -> CodeMatrix:
    """Hadamard code of order U = 2**kappa by the Sylvester recursion."""
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    W = np.array([[1]], dtype=np.int64)
    base = np.array([[1, 1], [1, -1]], dtype=np.int64)
    for _ in range(kappa):
        W = np.kron(base, W)
    return CodeMatrix(W=W.astype(float), kind="hadamard", gram=float(W.shape[0]))


def identity_code(U: int) -> CodeMatrix:
    """One active mode per symbol: the time-division special case."""
    return CodeMatrix(W=np.eye(U), kind="identity", gram=1.0)


def custom_code(W: np.ndarray) -> CodeMatrix:
    """Wrap a user-supplied square code after checking W^T W = g*I (1e-12)."""
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError("code matrix must be square")
    gram = W.T @ W
    g = float(np.mean(np.diag(gram)))
    if not np.allclose(gram, g * np.eye(W.shape[0]), atol=1e-12 * max(1.0, g)):
        raise ValueError("code matrix is not scaled-orthogonal (W^T W != g*I)")
    return CodeMatrix(W=W, kind="custom", gram=g)


def code_matrix(kind: str, U: int) -> CodeMatrix:
    """Build a code by name; Hadamard requires U to be a power of two."""
    if kind == "hadamard":
        kappa = int(U).bit_length() - 1
        if 2**kappa != U:
            raise ValueError(f"Hadamard coding requires U = 2**kappa, got U={U}")
        return hadamard(kappa)
    if kind == "identity":
        return identity_code(U)
    raise ValueError(f"unknown code kind {kind!r}")


def export_code_csv(code: CodeMatrix, path) -> None:
    """Write the code matrix as integer CSV rows for inspection."""
    with open(path, "w") as f:
        f.write(f"# kind={code.kind} U={code.U} gram={code.gram:g}\n")
        for row in code.W:
            f.write(",".join(str(int(v)) if v == int(v) else repr(v) for v in row) + "\n")


def projection_matrix(p: int, U: int) -> np.ndarray:
    """Cyclic permutation moving the first <p>_U rows to the last <p>_U rows.

    <p>_U = U is a full rotation, i.e. the identity.  The result is an
    orthogonal permutation matrix.
    """
    if p < 1:
        raise ValueError("symbol index p is 1-based")
    s = cyclic_index(p, U) % U
    P = np.zeros((U, U))
    rows = np.arange(U)
    P[rows, (rows + s) % U] = 1.0
    return P


def window_rows(p: int, U: int) -> np.ndarray:
    """0-based code-row indices for a U-symbol window starting at symbol p.

    Position k of the window (symbol p + k, k = 0..U-1) was encoded with
    code row <p + k>_U, so the arrangement is rows (p - 1 + k) mod U.
    Equivalently projection_matrix(p', U) @ W with p' = ((p - 2) mod U) + 1:
    the rotation lags the window start by one so that a window starting on
    a code-cycle boundary (p = 1 mod U) sees the code unrotated.
    """
    return (p - 1 + np.arange(U)) % U


def window_code(code: CodeMatrix, p: int) -> np.ndarray:
    """The code matrix as seen by a decode window starting at symbol p."""
    return code.W[window_rows(p, code.U)]


@dataclass(frozen=True)
class PilotPlan:
    """Unit-modulus pilot symbols s_u(p, l) for the sensing phase.

    values has shape (Psen, L, U).  The default all-ones plan makes pilot
    content drop out of the estimation chain; the random-QPSK rule keeps a
    realistic payload for synthesis-level tests.  Mode separation over a
    code window assumes each mode's pilot is constant within the window,
    which all-ones satisfies trivially.
    """

    values: np.ndarray
    rule: str

    @property
    def shape(self):
        return self.values.shape


def pilots_all_ones(Psen: int, L: int, U: int) -> PilotPlan:
    return PilotPlan(values=np.ones((Psen, L, U), dtype=complex), rule="all-ones")


def pilots_random_qpsk(Psen: int, L: int, U: int, seed: int) -> PilotPlan:
    rng = np.random.Generator(np.random.Philox(seed))
    quad = rng.integers(0, 4, size=(Psen, L, U))
    vals = np.exp(1j * (np.pi / 4.0 + np.pi / 2.0 * quad))
    return PilotPlan(values=vals, rule=f"random-qpsk(seed={seed})")


def precode_symbol(
    pilots: PilotPlan, code: CodeMatrix, modes: ModeSet, p: int, l: int, M: int
) -> np.ndarray:
    """Per-antenna transmit samples x_m(p, l), m = 1..M (p, l are 1-based).

    x_m = sum_u s_u(p, l) * exp(i*l_u*phi_m) * w(<p>_U, u) with
    phi_m = 2*pi*(m-1)/M.
    """
    U = code.U
    if modes.U != U:
        raise ValueError("mode set size does not match code size")
    if pilots.values.shape[2] != U:
        raise ValueError("pilot plan mode axis does not match code size")
    s = pilots.values[p - 1, l - 1, :]
    w = code.W[cyclic_index(p, U) - 1, :]
    phi_m = 2.0 * np.pi * np.arange(M) / M
    phases = np.exp(1j * np.outer(phi_m, modes.modes))  # (M, U)
    return phases @ (s * w)

"""Integer-order Bessel functions of the first kind.

The steering templates need J_l(x) for |l| up to M/2 and x = k*R*sin(theta)
up to about M/2.  Orders 0..n are generated together by Miller's downward
recurrence (upward recurrence is unstable for order > argument), normalized
with J_0(x) + 2*sum_k J_2k(x) = 1.  Negative orders use J_{-n} = (-1)^n J_n.
"""

from __future__ import annotations

import numpy as np

# Value magnitudes above this trigger a rescale during the downward pass
# (the unnormalized trial solution grows roughly like (2k/x)^k).
_RESCALE_AT = 1e250


def bessel_jn_table(n_max: int, x) -> np.ndarray:
    """J_n(x) for all orders n = 0..n_max at once.

    Parameters
    ----------
    n_max : int
        Largest (non-negative) order required.
    x : array_like
        Real arguments, any shape; negative x handled via parity.

    Returns
    -------
    ndarray of shape (n_max + 1,) + x.shape.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    x = np.asarray(x, dtype=float)
    shape = x.shape
    xf = np.abs(x.ravel())
    out = np.zeros((n_max + 1, xf.size))

    tiny = xf < 1e-12
    if np.any(tiny):
        out[0, tiny] = 1.0  # J_0(0) = 1, J_n(0) = 0 for n >= 1

    work = ~tiny
    if np.any(work):
        xw = xf[work]
        # Start high enough that the trial solution has converged to the
        # minimal one by the time order n_max is reached.
        start = int(max(n_max, np.ceil(xw.max()))) + 26
        start += start % 2  # even start keeps the normalization sum aligned
        fp1 = np.zeros_like(xw)          # trial J_{k+1}
        f = np.full_like(xw, 1e-30)      # trial J_k
        norm = np.zeros_like(xw)         # J_0 + 2*sum_{k even >= 2} J_k
        rows = out[:, work]
        for k in range(start, 0, -1):
            fm1 = (2.0 * k / xw) * f - fp1
            fp1, f = f, fm1
            if k - 1 <= n_max:
                rows[k - 1] = f
            if (k - 1) % 2 == 0:
                norm += f if k - 1 == 0 else 2.0 * f
            big = np.abs(f) > _RESCALE_AT
            if np.any(big):
                scale = np.where(big, 1e-250, 1.0)
                f *= scale
                fp1 *= scale
                norm *= scale
                rows[:, big] *= 1e-250
        rows /= norm
        out[:, work] = rows

    neg = x.ravel() < 0
    if np.any(neg):
        # J_n(-x) = (-1)^n J_n(x)
        signs = np.where(np.arange(n_max + 1) % 2 == 1, -1.0, 1.0)
        out[:, neg] *= signs[:, None]
    return out.reshape((n_max + 1,) + shape)


def bessel_j(order: int, x):
    """J_order(x) for a single (possibly negative) integer order."""
    n = abs(int(order))
    val = bessel_jn_table(n, x)[n]
    if order < 0 and n % 2 == 1:
        val = -val
    return val


def bessel_j_orders(orders, x) -> np.ndarray:
    """J_l(x) for a sequence of integer orders (may be negative).

    Returns an array of shape (len(orders),) + x.shape.
    """
    orders = np.asarray(orders, dtype=int)
    table = bessel_jn_table(int(np.abs(orders).max(initial=0)), x)
    picked = table[np.abs(orders)]
    flip = (orders < 0) & (np.abs(orders) % 2 == 1)
    if np.any(flip):
        picked[flip] = -picked[flip]
    return picked


def bessel_j_series(order: int, x, terms: int = 30):
    """Ascending-series evaluation of J_n, accurate for |x| <= 1.

    Independent of the recurrence path; used as a cross-check oracle.
    """
    import math

    n = abs(int(order))
    x = np.asarray(x, dtype=float)
    half = x / 2.0
    term = half**n / math.factorial(n)
    total = np.array(term, dtype=float, copy=True)
    for k in range(1, terms):
        term = term * (-(half**2)) / (k * (k + n))
        total = total + term
    if order < 0 and n % 2 == 1:
        total = -total
    return total

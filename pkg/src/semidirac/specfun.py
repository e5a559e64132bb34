"""Bessel functions of the first kind, integer order.

Small arguments use the ascending power series; larger ones use Miller's
downward recurrence normalised with ``J_0 + 2 * sum(J_2k) = 1``.  Both paths
accept numpy arrays, and a whole ladder of orders comes out of one pass,
which is what the field models need (they always ask for ``m-1, m, m+1``
and a couple of neighbours for derivatives).
"""
from __future__ import annotations

import math

import numpy as np

MAX_ORDER = 64

# Below this the series is cancellation-free to ~1e-16; above it Miller wins.
SERIES_SWITCH = 2.0

_RESCALE = 1e250
SERIES_TERMS = 14


def _check_order(m: int) -> None:
    if abs(int(m)) > MAX_ORDER:
        raise ValueError(f"Bessel order {m} outside supported range |m| <= {MAX_ORDER}")


def _series_table(mmax: int, x: np.ndarray) -> np.ndarray:
    half = 0.5 * x
    q = -half * half
    out = np.empty((mmax + 1,) + x.shape)
    lead = np.ones_like(x)
    for m in range(mmax + 1):
        if m > 0:
            lead = lead * half / m
        term = lead.copy()
        total = term.copy()
        # (x/2)^2k / (k! (k+m)!) < 1e-18 relative by k = SERIES_TERMS for x <= 2
        for k in range(1, SERIES_TERMS):
            term = term * q / (k * (k + m))
            total += term
        out[m] = total
    return out


def _series_scalar(mmax: int, x: float) -> list:
    half = 0.5 * x
    q = -half * half
    out = []
    lead = 1.0
    for m in range(mmax + 1):
        if m > 0:
            lead *= half / m
        term = total = lead
        for k in range(1, SERIES_TERMS):
            term *= q / (k * (k + m))
            total += term
        out.append(total)
    return out


def _miller_scalar(mmax: int, x: float) -> list:
    top = max(mmax, int(x))
    start = 2 * ((top + int(math.sqrt(60.0 * top)) + 16) // 2)
    out = [0.0] * (mmax + 1)
    nxt, cur, norm = 0.0, 1e-30, 0.0
    for k in range(start, 0, -1):
        nxt, cur = cur, (2.0 * k / x) * cur - nxt
        j = k - 1
        if j <= mmax:
            out[j] = cur
        if j > 0 and j % 2 == 0:
            norm += 2.0 * cur
        if abs(cur) > _RESCALE:
            cur /= _RESCALE
            nxt /= _RESCALE
            norm /= _RESCALE
            out = [v / _RESCALE for v in out]
    norm += cur
    return [v / norm for v in out]


def _miller_table(mmax: int, x: np.ndarray) -> np.ndarray:
    top = max(mmax, int(np.max(x)))
    start = 2 * ((top + int(math.sqrt(60.0 * top)) + 16) // 2)
    out = np.zeros((mmax + 1,) + x.shape)
    nxt = np.zeros_like(x)
    cur = np.full_like(x, 1e-30)
    norm = np.zeros_like(x)
    for k in range(start, 0, -1):
        prev = (2.0 * k / x) * cur - nxt
        nxt, cur = cur, prev
        # cur now holds the (unnormalised) J_{k-1}
        j = k - 1
        if j <= mmax:
            out[j] = cur
        if j > 0 and j % 2 == 0:
            norm += 2.0 * cur
        big = np.abs(cur) > _RESCALE
        if np.any(big):
            scale = np.where(big, 1.0 / _RESCALE, 1.0)
            cur = cur * scale
            nxt = nxt * scale
            norm = norm * scale
            out *= scale
    norm += cur
    return out / norm


def bessel_j_table(mmax: int, x) -> np.ndarray:
    """Return ``J_0 .. J_mmax`` at ``x`` stacked along a new leading axis."""
    _check_order(mmax)
    if mmax < 0:
        raise ValueError("mmax must be non-negative")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("Bessel argument must be finite")
    if x.ndim == 0:
        xs = float(x)
        ax = abs(xs)
        vals = _series_scalar(mmax, ax) if ax <= SERIES_SWITCH else _miller_scalar(mmax, ax)
        if xs < 0:
            vals = [-v if m % 2 else v for m, v in enumerate(vals)]
        return np.array(vals)
    ax = np.abs(x)
    out = np.empty((mmax + 1,) + x.shape)
    small = ax <= SERIES_SWITCH
    if np.any(small):
        out[:, small] = _series_table(mmax, ax[small])
    if np.any(~small):
        out[:, ~small] = _miller_table(mmax, ax[~small])
    neg = x < 0
    if np.any(neg):
        odd = np.arange(mmax + 1) % 2 == 1
        flip = out[odd]
        flip[:, neg] *= -1.0
        out[odd] = flip
    return out


def bessel_j_orders(orders, x) -> np.ndarray:
    """J_m(x) for a sequence of signed orders; result has shape (len(orders), *x.shape)."""
    orders = [int(m) for m in orders]
    for m in orders:
        _check_order(m)
    table = bessel_j_table(max(abs(m) for m in orders), x)
    rows = []
    for m in orders:
        row = table[abs(m)]
        rows.append(-row if (m < 0 and m % 2) else row)
    return np.stack(rows)


def bessel_j_ladder(orders, x: float) -> list:
    """Scalar J_m(x) for consecutive signed ``orders`` as a Python list (no array overhead)."""
    orders = list(orders)
    top = max(abs(m) for m in orders)
    _check_order(top)
    ax = abs(float(x))
    if not math.isfinite(ax):
        raise ValueError("Bessel argument must be finite")
    vals = _series_scalar(top, ax) if ax <= SERIES_SWITCH else _miller_scalar(top, ax)
    out = []
    for m in orders:
        v = vals[abs(m)]
        # J_{-m} = (-1)^m J_m and J_m(-x) = (-1)^m J_m(x)
        if (m < 0 and m % 2) != (x < 0 and abs(m) % 2 == 1):
            v = -v
        out.append(v)
    return out


def bessel_j(m: int, x):
    """First-kind Bessel function J_m(x) for integer ``m``, ``|m| <= 64``.

    Returns a float for scalar input, otherwise an array of ``x``'s shape.
    """
    _check_order(m)
    val = bessel_j_orders([m], x)[0]
    return float(val) if np.ndim(val) == 0 else val


def bessel_j_derivative(m: int, x):
    """dJ_m/dx from the recurrence (J_{m-1} - J_{m+1}) / 2."""
    _check_order(m)
    _check_order(abs(m) + 1)
    lo, hi = bessel_j_orders([m - 1, m + 1], x)
    val = 0.5 * (lo - hi)
    return float(val) if np.ndim(val) == 0 else val

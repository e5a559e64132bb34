"""Dormand-Prince 5(4) integrator with continuous (dense) output.

Dense output uses the method's own quartic continuous extension by default;
cubic Hermite interpolation on the step nodes is available as a cheaper
alternative but its O(h^4) error is far above the step error at tight
tolerances.

Written in-house rather than taken from scipy because the trajectory code
needs a hook after every accepted step (eigen-branch re-anchoring and
per-step diagnostics) and a partial result with a reason when the step size
collapses near a singular force.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_ERR = _B5 - _B4
# quartic continuous extension (Shampine), y(t0 + s h) = y0 + h * K^T P [s, s^2, s^3, s^4]
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])


class StepSizeUnderflow(RuntimeError):
    pass


@dataclass
class Solution:
    t: np.ndarray
    y: np.ndarray            # [n_steps + 1, dim] at accepted step ends
    dy: np.ndarray           # derivatives at the same nodes
    status: str = "ok"       # "ok", "underflow", "nonfinite", "stopped"
    message: str = ""
    n_rejected: int = 0
    diagnostics: list = field(default_factory=list)   # (t, h, err) of steps forced at min_step
    stages: Optional[np.ndarray] = None   # [n_steps, 7, dim]

    def dense(self, times, method: str = "quartic") -> np.ndarray:
        """Interpolate the solution at ``times`` (within the integrated span)."""
        times = np.atleast_1d(np.asarray(times, float))
        if method == "quartic" and self.stages is not None and len(self.t) > 1:
            return self._quartic(times)
        return self._hermite(times)

    def _quartic(self, times):
        forward = self.t[-1] >= self.t[0]
        key = self.t if forward else -self.t
        tk = times if forward else -times
        idx = np.clip(np.searchsorted(key, tk, side="right") - 1, 0, len(self.t) - 2)
        h = self.t[idx + 1] - self.t[idx]
        s = (times - self.t[idx]) / h
        powers = np.stack([s, s ** 2, s ** 3, s ** 4], axis=-1)      # [n, 4]
        q = np.einsum("nkd,kp->ndp", self.stages[idx], _P)           # [n, dim, 4]
        return self.y[idx] + h[:, None] * np.einsum("ndp,np->nd", q, powers)

    def _hermite(self, times):
        """Cubic Hermite interpolation between accepted nodes."""
        forward = self.t[-1] >= self.t[0]
        tt = self.t if forward else self.t[::-1]
        yy = self.y if forward else self.y[::-1]
        dd = self.dy if forward else self.dy[::-1]
        idx = np.clip(np.searchsorted(tt, times, side="right") - 1, 0, len(tt) - 2)
        t0, t1 = tt[idx], tt[idx + 1]
        h = (t1 - t0)[:, None]
        s = ((times - t0) / (t1 - t0))[:, None]
        h00 = 2 * s ** 3 - 3 * s ** 2 + 1
        h10 = s ** 3 - 2 * s ** 2 + s
        h01 = -2 * s ** 3 + 3 * s ** 2
        h11 = s ** 3 - s ** 2
        return h00 * yy[idx] + h10 * h * dd[idx] + h01 * yy[idx + 1] + h11 * h * dd[idx + 1]


def integrate(fun: Callable[[float, np.ndarray], np.ndarray], t0: float, y0, t_end: float,
              rtol: float = 1e-10, atol: float = 1e-12, h0: Optional[float] = None,
              max_step: float = np.inf, on_step: Optional[Callable] = None,
              max_steps: int = 2_000_000, min_step: float = 0.0) -> Solution:
    """Adaptive DP5(4) from ``t0`` to ``t_end`` (either direction).

    ``on_step(t, y)`` runs after every accepted step; returning a truthy
    value stops the integration with status "stopped".

    With ``min_step > 0`` a step that would shrink below it is taken at
    ``min_step`` and accepted whatever its error estimate (logged in
    ``diagnostics``).  This steps over integrable singularities such as a
    square-root cusp in the force, which no tolerance can resolve.
    """
    y = np.array(y0, float)
    direction = 1.0 if t_end >= t0 else -1.0
    span = abs(t_end - t0)
    ts, ys, stages = [t0], [y.copy()], []
    k1 = np.asarray(fun(t0, y), float)
    dys = [k1.copy()]
    if not np.all(np.isfinite(k1)):
        return Solution(np.array(ts), np.array(ys), np.array(dys), "nonfinite", "initial derivative not finite")
    if h0 is None:
        scale = atol + rtol * np.abs(y)
        d0 = np.sqrt(np.mean((y / scale) ** 2))
        d1 = np.sqrt(np.mean((k1 / scale) ** 2))
        h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        h0 = min(h0, span, max_step)
    h = h0
    t = t0
    n_rej = 0
    diagnostics = []
    status, msg = "ok", ""
    for _ in range(max_steps):
        if direction * (t_end - t) <= 0:
            break
        h = min(h, abs(t_end - t), max_step)
        # the floor never drops to the round-off limit on t, which grows with |t|
        floor = max(min_step, 2e-14 * max(1.0, abs(t))) if min_step > 0 else 0.0
        forced = min_step > 0 and h <= floor
        if forced:
            h = min(floor, abs(t_end - t))
        if h < 1e-14 * max(1.0, abs(t)) and not forced:
            status, msg = "underflow", f"step size underflow at t={t:.6g}"
            break
        k = [k1]
        for s in range(1, 7):
            yi = y + direction * h * sum(a * kj for a, kj in zip(_A[s], k))
            k.append(np.asarray(fun(t + direction * _C[s] * h, yi), float))
        y_new = y + direction * h * sum(b * kj for b, kj in zip(_B5, k) if b != 0.0)
        err_vec = direction * h * sum(e * kj for e, kj in zip(_ERR, k) if e != 0.0)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = np.sqrt(np.mean((err_vec / scale) ** 2))
        if not np.isfinite(err):
            if forced:
                status, msg = "nonfinite", f"non-finite derivative at the minimum step, t={t:.6g}"
                break
            n_rej += 1
            h *= 0.2
            continue
        if err <= 1.0 or forced:
            if err > 1.0:
                diagnostics.append((t, h, err))
            t = t + direction * h
            y = y_new
            k1 = k[6]  # FSAL
            if not np.all(np.isfinite(y)):
                status, msg = "nonfinite", f"non-finite state at t={t:.6g}"
                break
            ts.append(t)
            ys.append(y.copy())
            dys.append(k1.copy())
            stages.append(np.array(k))
            if on_step is not None and on_step(t, y):
                status, msg = "stopped", f"stopped by step hook at t={t:.6g}"
                break
            fac = 0.9 * err ** -0.2 if err > 0 else 5.0
            h *= min(5.0, max(0.2, fac))
        else:
            n_rej += 1
            h *= max(0.2, 0.9 * err ** -0.2)
    else:
        status, msg = "underflow", "maximum number of steps reached"
    dim = len(y)
    st = np.array(stages) if stages else np.zeros((0, 7, dim))
    return Solution(np.array(ts), np.array(ys), np.array(dys), status, msg, n_rej, diagnostics, stages=st)

"""Analytic electromagnetic field models in dimensionless units.

Lengths are in c/omega, times in 1/omega, fields in m c omega / q and vector
potentials in m c^2 / q.  Every model returns a :class:`FieldSample` holding
E, B and their first space and time derivatives, evaluated analytically.
All sampling functions broadcast over a leading batch shape: ``t`` has shape
``S`` (or is a scalar) and ``r`` has shape ``S + (3,)``.

Bessel beams are built from the regular cylinder harmonics
``C_n = J_n(k_perp rho) exp(i n phi)``, whose Cartesian derivatives are again
cylinder harmonics, so the field and its gradient come from one Bessel ladder.
Physical fields are the real parts of the complex phasors.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .specfun import bessel_j_ladder, bessel_j_orders

_PLUS = np.array([1.0, 1.0j, 0.0])    # e_+ = e_x + i e_y
_MINUS = np.array([1.0, -1.0j, 0.0])  # e_- = e_x - i e_y
_ZHAT = np.array([0.0, 0.0, 1.0 + 0.0j])


@dataclass(frozen=True)
class BesselBeamParams:
    """Vector Bessel beam: vortex order, transverse wavenumber and TE/TM content.

    ``kperp`` is in units of omega/c, amplitudes in m c omega / q (the
    dimensionless coupling e0/omega).  ``kz`` follows from the vacuum dispersion.
    """

    m_z: int = 1
    kperp: float = 0.04
    amp_te: float = 0.005
    amp_tm: float = 0.0
    phase_te: float = 0.0
    phase_tm: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.kperp < 1.0:
            raise ValueError("kperp must lie in (0, 1) in units of omega/c")
        if self.amp_te < 0 or self.amp_tm < 0:
            raise ValueError("amplitudes must be non-negative")

    @property
    def kz(self) -> float:
        return math.sqrt(1.0 - self.kperp ** 2)

    @property
    def amp(self) -> float:
        """Field scale used for relative tolerances and null-surface thresholds."""
        return max(self.amp_te, self.amp_tm)

    @property
    def te_complex(self) -> complex:
        return self.amp_te * complex(math.cos(self.phase_te), math.sin(self.phase_te))

    @property
    def tm_complex(self) -> complex:
        return self.amp_tm * complex(math.cos(self.phase_tm), math.sin(self.phase_tm))


@dataclass
class FieldSample:
    """E and B with first derivatives.

    ``grad_e[..., i, j]`` is dE_i/dx_j (likewise ``grad_b``); ``dt_e`` and
    ``dt_b`` are time derivatives.  Shapes carry an optional leading batch.
    """

    e_vec: np.ndarray
    b_vec: np.ndarray
    grad_e: np.ndarray
    grad_b: np.ndarray
    dt_e: np.ndarray
    dt_b: np.ndarray

    @property
    def d_e(self) -> np.ndarray:
        """Spacetime derivatives of E as ``[..., i, mu]`` with mu = (t, x, y, z)."""
        return np.concatenate([self.dt_e[..., None], self.grad_e], axis=-1)

    @property
    def d_b(self) -> np.ndarray:
        return np.concatenate([self.dt_b[..., None], self.grad_b], axis=-1)

    def take(self, index) -> "FieldSample":
        return FieldSample(*(getattr(self, k)[index] for k in
                             ("e_vec", "b_vec", "grad_e", "grad_b", "dt_e", "dt_b")))

    @classmethod
    def uniform(cls, e=(0.0, 0.0, 0.0), b=(0.0, 0.0, 0.0)) -> "FieldSample":
        z3 = np.zeros(3)
        return cls(np.asarray(e, float), np.asarray(b, float), np.zeros((3, 3)),
                   np.zeros((3, 3)), z3.copy(), z3.copy())


@dataclass
class VectorPotential:
    """Radiation-gauge potential: ``a0`` is identically zero."""

    a0: np.ndarray
    a_vec: np.ndarray


def _split(t, r):
    r = np.asarray(r, dtype=float)
    t = np.broadcast_to(np.asarray(t, dtype=float), r.shape[:-1])
    return t, r[..., 0], r[..., 1], r[..., 2]


def _harmonics(orders, kperp, x, y):
    """Cylinder harmonics C_n for each requested order (dict n -> array)."""
    rho = np.hypot(x, y)
    safe = np.where(rho > 0, rho, 1.0)
    phase = np.where(rho > 0, (x + 1j * y) / safe, 1.0 + 0j)
    bess = bessel_j_orders(orders, kperp * rho)
    return {n: bess[i] * phase ** n for i, n in enumerate(orders)}


def _terms(params: BesselBeamParams, electric: bool):
    """(order, coefficient, polarisation) triples of the complex field."""
    te, tm = params.te_complex, params.tm_complex
    if not electric:
        # duality map for the magnetic field; this sign satisfies Faraday's law
        # with the exp(-i t) carrier
        te, tm = tm, -te
    k2 = 2.0 * params.kperp
    kz = params.kz
    m = params.m_z
    return [
        (m - 1, (te + 1j * kz * tm) / k2, _PLUS),
        (m + 1, (te - 1j * kz * tm) / k2, _MINUS),
        (m, tm, _ZHAT),
    ]


def bessel_complex(params: BesselBeamParams, t, r):
    """Complex phasors (E_c, B_c) and their derivatives.

    Returns a dict with keys ``e``, ``b`` (shape S+(3,)), ``grad_e``/``grad_b``
    (S+(3,3)) and ``dt_e``/``dt_b``.
    """
    t, x, y, z = _split(t, r)
    m = params.m_z
    k = params.kperp
    carrier = np.exp(1j * (params.kz * z - t))
    harm = _harmonics(range(m - 2, m + 3), k, x, y)
    out = {}
    for name, electric in (("e", True), ("b", False)):
        val = np.zeros(x.shape + (3,), complex)
        dx = np.zeros_like(val)
        dy = np.zeros_like(val)
        for n, coef, pol in _terms(params, electric):
            c = harm[n]
            cx = 0.5 * k * (harm[n - 1] - harm[n + 1])
            cy = 0.5j * k * (harm[n + 1] + harm[n - 1])
            val += (coef * c)[..., None] * pol
            dx += (coef * cx)[..., None] * pol
            dy += (coef * cy)[..., None] * pol
        cf = carrier[..., None]
        val, dx, dy = val * cf, dx * cf, dy * cf
        dz = 1j * params.kz * val
        out[name] = val
        out["grad_" + name] = np.stack([dx, dy, dz], axis=-1)
        out["dt_" + name] = -1j * val
    return out


def _point_bessel(params: BesselBeamParams, t: float, x: float, y: float, z: float):
    """Scalar version of :func:`bessel_complex` in plain Python complex arithmetic.

    The integrator samples one point at a time, where numpy's per-call overhead
    dominates; this path is ~10x faster.  Returns (sample, potential vector).
    """
    m, k, kz = params.m_z, params.kperp, params.kz
    rho = math.hypot(x, y)
    u = complex(x / rho, y / rho) if rho > 0 else 1.0 + 0j
    bess = bessel_j_ladder(range(m - 3, m + 4), k * rho) if rho > 0 else None
    harm = {}
    for i, n in enumerate(range(m - 3, m + 4)):
        if bess is None:
            harm[n] = 1.0 + 0j if n == 0 else 0j
        else:
            harm[n] = bess[i] * (u ** n if n >= 0 else (1.0 / u) ** (-n))
    hk = 0.5 * k

    def cx(n):
        return hk * (harm[n - 1] - harm[n + 1])

    def cy(n):
        return 1j * hk * (harm[n + 1] + harm[n - 1])

    carrier = complex(math.cos(kz * z - t), math.sin(kz * z - t))
    fields = []
    for electric in (True, False):
        (n1, c1, _), (n2, c2, _), (n3, c3, _) = _terms(params, electric)
        rows = []
        for op in (lambda n: harm[n], cx, cy):
            a1, a2, a3 = c1 * op(n1), c2 * op(n2), c3 * op(n3)
            rows.append(((a1 + a2) * carrier, 1j * (a1 - a2) * carrier, a3 * carrier))
        val, dx, dy = rows
        grad = [[dx[i], dy[i], 1j * kz * val[i]] for i in range(3)]
        fields.append((val, grad))
    (ev, eg), (bv, bg) = fields
    e = np.array([v.real for v in ev])
    b = np.array([v.real for v in bv])
    ge = np.array([[g.real for g in row] for row in eg])
    gb = np.array([[g.real for g in row] for row in bg])
    dte = np.array([(-1j * v).real for v in ev])
    dtb = np.array([(-1j * v).real for v in bv])
    a = np.array([(-1j * v).real for v in ev])
    return FieldSample(e, b, ge, gb, dte, dtb), a


def sample_bessel(params: BesselBeamParams, t, r) -> FieldSample:
    """Real E, B and derivatives of a vector Bessel beam at (t, r)."""
    c = bessel_complex(params, t, r)
    return FieldSample(c["e"].real, c["b"].real, c["grad_e"].real, c["grad_b"].real,
                       c["dt_e"].real, c["dt_b"].real)


def crossed_params(amp: float, m_z: int = 1, kperp: float = 0.04, phase: float = 0.0) -> BesselBeamParams:
    """Equal-amplitude, equal-phase TE+TM superposition of one vortex order."""
    return BesselBeamParams(m_z=m_z, kperp=kperp, amp_te=amp, amp_tm=amp,
                            phase_te=phase, phase_tm=phase)


def sample_crossed(params: BesselBeamParams, t, r) -> FieldSample:
    """Sample the TE+TM superposition built from ``params`` (TE amplitude and phase used for both)."""
    return sample_bessel(crossed_params(params.amp_te, params.m_z, params.kperp, params.phase_te), t, r)


def vector_potential(params: BesselBeamParams, t, r) -> VectorPotential:
    """Radiation-gauge potential of a Bessel beam, A = Re(-i E_c) for exp(-i t) phasors."""
    c = bessel_complex(params, t, r)
    a = (-1j * c["e"]).real
    return VectorPotential(np.zeros(a.shape[:-1]), a)


def sample_static_magnet(b0: float, gradient: float, t, r) -> FieldSample:
    """Solenoidal gradient magnet B = (-g x/2, -g y/2, b0 + g z), no electric field."""
    t, x, y, z = _split(t, r)
    shape = x.shape
    b = np.stack([-0.5 * gradient * x, -0.5 * gradient * y, b0 + gradient * z], axis=-1)
    grad_b = np.zeros(shape + (3, 3))
    grad_b[..., 0, 0] = -0.5 * gradient
    grad_b[..., 1, 1] = -0.5 * gradient
    grad_b[..., 2, 2] = gradient
    zero3 = np.zeros(shape + (3,))
    return FieldSample(zero3.copy(), b, np.zeros(shape + (3, 3)), grad_b, zero3.copy(), zero3.copy())


def static_magnet_potential(b0: float, gradient: float, t, r) -> VectorPotential:
    t, x, y, z = _split(t, r)
    bz = b0 + gradient * z
    a = np.stack([-0.5 * bz * y, 0.5 * bz * x, np.zeros_like(x)], axis=-1)
    return VectorPotential(np.zeros(x.shape), a)


def sample_plane_wave(amp: float, t, r) -> FieldSample:
    """Linearly polarised plane wave along +z: E = amp cos(z - t) e_x, B = amp cos(z - t) e_y."""
    t, x, y, z = _split(t, r)
    shape = x.shape
    c = amp * np.cos(z - t)
    s = amp * np.sin(z - t)
    zero = np.zeros(shape)
    e = np.stack([c, zero, zero], axis=-1)
    b = np.stack([zero, c, zero], axis=-1)
    grad_e = np.zeros(shape + (3, 3))
    grad_b = np.zeros(shape + (3, 3))
    grad_e[..., 0, 2] = -s
    grad_b[..., 1, 2] = -s
    dt_e = np.stack([s, zero, zero], axis=-1)
    dt_b = np.stack([zero, s, zero], axis=-1)
    return FieldSample(e, b, grad_e, grad_b, dt_e, dt_b)


def plane_wave_potential(amp: float, t, r) -> VectorPotential:
    t, x, y, z = _split(t, r)
    zero = np.zeros(x.shape)
    return VectorPotential(zero, np.stack([amp * np.sin(z - t), zero, zero], axis=-1))


class FieldModel:
    """Uniform interface over the analytic models used by the integrator and CLI."""

    name = "none"
    amp = 0.0

    def sample(self, t, r) -> FieldSample:
        raise NotImplementedError

    def potential(self, t, r) -> VectorPotential:
        raise NotImplementedError

    def sample_with_potential(self, t, r):
        """(FieldSample, A) in one call; models override when sharing work pays off."""
        return self.sample(t, r), self.potential(t, r).a_vec


class BesselBeam(FieldModel):
    name = "bessel"

    def __init__(self, params: BesselBeamParams):
        self.params = params
        self.amp = params.amp

    def sample(self, t, r):
        if np.ndim(r) == 1 and np.ndim(t) == 0:
            return _point_bessel(self.params, float(t), *map(float, r))[0]
        return sample_bessel(self.params, t, r)

    def potential(self, t, r):
        return vector_potential(self.params, t, r)

    def sample_with_potential(self, t, r):
        if np.ndim(r) == 1 and np.ndim(t) == 0:
            return _point_bessel(self.params, float(t), *map(float, r))
        return sample_bessel(self.params, t, r), vector_potential(self.params, t, r).a_vec


class StaticMagnet(FieldModel):
    name = "static"

    def __init__(self, b0: float, gradient: float = 0.0):
        self.b0, self.gradient = b0, gradient
        self.amp = abs(b0)

    def sample(self, t, r):
        return sample_static_magnet(self.b0, self.gradient, t, r)

    def potential(self, t, r):
        return static_magnet_potential(self.b0, self.gradient, t, r)


class PlaneWave(FieldModel):
    name = "plane"

    def __init__(self, amp: float):
        self.amp = amp

    def sample(self, t, r):
        return sample_plane_wave(self.amp, t, r)

    def potential(self, t, r):
        return plane_wave_potential(self.amp, t, r)


class NoField(FieldModel):
    def sample(self, t, r):
        t, x, _, _ = _split(t, r)
        z3 = np.zeros(x.shape + (3,))
        z33 = np.zeros(x.shape + (3, 3))
        return FieldSample(z3, z3.copy(), z33, z33.copy(), z3.copy(), z3.copy())

    def potential(self, t, r):
        t, x, _, _ = _split(t, r)
        return VectorPotential(np.zeros(x.shape), np.zeros(x.shape + (3,)))


def maxwell_residuals(model: FieldModel, t: float, r, h: float = 1e-4) -> dict:
    """Central-difference Maxwell residuals (source-free) at one point.

    Independent of the analytic derivatives: only field values are used.
    """
    r = np.asarray(r, float)

    def fd(fn, axis):
        dr = np.zeros(3)
        if axis == 0:
            return (fn(t + h, r) - fn(t - h, r)) / (2 * h)
        dr[axis - 1] = h
        return (fn(t, r + dr) - fn(t, r - dr)) / (2 * h)

    e = lambda tt, rr: model.sample(tt, rr).e_vec
    b = lambda tt, rr: model.sample(tt, rr).b_vec
    de = np.stack([fd(e, a) for a in range(4)], axis=-1)  # [i, mu]
    db = np.stack([fd(b, a) for a in range(4)], axis=-1)

    def curl(d):
        return np.array([d[2, 2] - d[1, 3], d[0, 3] - d[2, 1], d[1, 1] - d[0, 2]])

    out = {
        "div_e": float(abs(np.trace(de[:, 1:]))),
        "div_b": float(abs(np.trace(db[:, 1:]))),
        "faraday": float(np.linalg.norm(curl(de) + db[:, 0])),
        "ampere": float(np.linalg.norm(curl(db) - de[:, 0])),
    }
    # relative to the size of the field derivatives themselves
    scale = max(float(np.linalg.norm(de)), float(np.linalg.norm(db)))
    out["relative"] = max(out.values()) / scale if scale > 0 else 0.0
    return out

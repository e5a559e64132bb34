"""Spin-corrected relativistic trajectories in lab time.

The electron moves with a field-dependent effective mass m~(t, x); in lab
time and the dimensionless units of :mod:`semidirac.fields`,

    m~ gamma dv/dt = E + v x B - v (E.v) - (grad m~ + v dm~/dt) / gamma.

With spin off (or chi = 0) m~ = 1 and this is the Lorentz force.  Two extra
state components accumulate the real and imaginary effective actions along
the path, in units of m c^2 / omega (divide by chi for units of hbar):

    dS/dt = m~ / gamma + v.A,        ds/dt = -Delta M / gamma.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional, Sequence
import math
import warnings

import numpy as np

from .fields import BesselBeam, BesselBeamParams, FieldModel, FieldSample, vector_potential
from .invariants import (Convention, EigenMode, NullSurfaceWarning, NULL_THRESHOLD, PairCreationError, eigenvalues,
                         effective_mass, lambda_gradient, mass_from_ell, mass_gradient_from,
                         spin_branch_ell, spin_branch_gradient, track_branch)
from . import ode


class StateError(ValueError):
    """Superluminal or otherwise invalid particle state."""


class SemiclassicalValidityWarning(RuntimeWarning):
    """de Broglie wavelength not small compared with the field length scale."""


class SpinRule(str, Enum):
    OFF = "off"
    FIG2 = "FIG2"      # ell = sign * mu_B sqrt|Delta^2|, l = 0
    STRICT = "STRICT"  # real/imaginary split of sign * mu_B sqrt(Delta^2)
    EIGEN = "EIGEN"    # complex eigenvalue of branch j, continuity tracked


@dataclass
class TrajectoryState:
    t: float
    x: np.ndarray
    v: np.ndarray
    gamma: float
    s_real: float = 0.0
    s_imag: float = 0.0
    branch_sign: int = 1

    @classmethod
    def from_velocity(cls, t, x, v, branch_sign: int = 1, s_real=0.0, s_imag=0.0) -> "TrajectoryState":
        v = np.asarray(v, float)
        return cls(float(t), np.asarray(x, float), v, lorentz_gamma(v), s_real, s_imag, branch_sign)

    @classmethod
    def cylindrical(cls, rho, phi, z, v_rho, phi_dot, v_z, t=0.0, branch_sign: int = 1):
        """Build from (rho, phi, z) and (drho/dct, dphi/dct, dz/dct)."""
        c, s = np.cos(phi), np.sin(phi)
        x = np.array([rho * c, rho * s, z])
        v_phi = rho * phi_dot
        v = np.array([v_rho * c - v_phi * s, v_rho * s + v_phi * c, v_z])
        return cls.from_velocity(t, x, v, branch_sign)

    @property
    def rho(self) -> float:
        return float(np.hypot(self.x[0], self.x[1]))

    @property
    def phi(self) -> float:
        return float(np.arctan2(self.x[1], self.x[0]))


@dataclass
class ConservedPair:
    L: float
    P: float


@dataclass
class SimulationConfig:
    model: FieldModel
    chi: float = 0.0
    spin: SpinRule = SpinRule.FIG2
    sign: int = 1                 # spin branch sign for FIG2 / STRICT
    branch: int = 1               # eigen-branch j for EIGEN
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = np.inf
    # steps are never shorter than this; the sqrt|Delta^2| cusp of the FIG2 mass
    # gives an integrable force singularity on null surfaces that tolerances cannot resolve
    min_step: float = 1e-11
    gradient: str = "analytic"    # or "fd"
    fd_step: float = 1e-5
    # callable t -> (dE[3], dB[3], dm~, d grad m~[4], d zeta[4]) added to the fields,
    # the mass and the imaginary action (see selfconsistent.CorrectionTrack)
    correction: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        self.spin = SpinRule(self.spin)
        if self.chi < 0:
            raise ValueError("chi must be non-negative")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if self.branch not in (1, 2, 3, 4):
            raise ValueError("branch must be 1..4")
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")
        if self.min_step < 0:
            raise ValueError("min_step must be non-negative")
        if self.gradient not in ("analytic", "fd"):
            raise ValueError("gradient must be 'analytic' or 'fd'")

    @property
    def spin_on(self) -> bool:
        return self.spin is not SpinRule.OFF and self.chi > 0


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    s_real: np.ndarray
    s_imag: np.ndarray
    mass: np.ndarray
    config: SimulationConfig
    status: str = "ok"
    message: str = ""
    near_null_steps: int = 0
    max_gamma_error: float = 0.0     # per accepted step
    gamma_drift: float = 0.0         # accumulated over the run
    forced_steps: int = 0            # steps accepted at min_step above tolerance
    solution: Optional[ode.Solution] = field(default=None, repr=False)

    @property
    def gamma(self) -> np.ndarray:
        return 1.0 / np.sqrt(1.0 - np.sum(self.v ** 2, axis=-1))

    @property
    def rho(self) -> np.ndarray:
        return np.hypot(self.x[:, 0], self.x[:, 1])

    @property
    def phi(self) -> np.ndarray:
        """Azimuth unwrapped continuously along the path."""
        return np.unwrap(np.arctan2(self.x[:, 1], self.x[:, 0]))

    def state(self, i: int) -> TrajectoryState:
        sign = self.config.sign if self.config.spin is not SpinRule.EIGEN else self.config.branch
        return TrajectoryState(float(self.t[i]), self.x[i].copy(), self.v[i].copy(),
                               float(self.gamma[i]), float(self.s_real[i]), float(self.s_imag[i]), sign)

    def states(self):
        return [self.state(i) for i in range(len(self.t))]

    def actions_in_hbar(self):
        """(S, s) in units of hbar; undefined for chi = 0."""
        if self.config.chi == 0:
            raise ZeroDivisionError("actions in units of hbar need chi > 0")
        return self.s_real / self.config.chi, self.s_imag / self.config.chi


def lorentz_gamma(v) -> float:
    v2 = float(np.dot(v, v))
    if not v2 < 1.0:
        raise StateError(f"|v| = {np.sqrt(v2):.6g} >= 1")
    return 1.0 / np.sqrt(1.0 - v2)


# ---------------------------------------------------------------------------
# effective mass along the path
# ---------------------------------------------------------------------------

def _free_mode() -> EigenMode:
    return EigenMode(0, 0j, 0.0, 0.0, 1.0, 0.0, np.zeros(4))


def mode_at(config: SimulationConfig, f: FieldSample, anchor: Optional[complex] = None) -> EigenMode:
    """Effective mass, its 4-gradient and Delta M for the configured spin rule."""
    if not config.spin_on:
        return _free_mode()
    amp = config.model.amp
    chi = config.chi
    if config.spin in (SpinRule.FIG2, SpinRule.STRICT):
        conv = Convention(config.spin.value)
        ell, little_l = spin_branch_ell(f, config.sign, chi, conv)
        d_ell, d_l, near = spin_branch_gradient(f, config.sign, chi, conv, amp)
        _, _, mt, dm = mass_from_ell(ell, little_l)
        grad = mass_gradient_from(ell, little_l, d_ell, d_l)
        lam = complex(2.0 * (ell + 1j * little_l) / chi)
        return EigenMode(config.sign, lam, float(ell), float(little_l), float(mt), float(dm), grad, near)
    lam = complex(eigenvalues(f)[config.branch - 1])
    if anchor is not None:
        lam = track_branch(anchor, lam)
    ell, little_l, mt, dm = effective_mass(lam, chi)
    near = abs(lam) <= NULL_THRESHOLD * amp
    if near:
        grad = np.zeros(4)
    else:
        which = "minus" if config.branch in (1, 2) else "plus"
        d_mu = 0.5 * chi * lambda_gradient(f, lam, which)
        grad = mass_gradient_from(float(ell), float(little_l), d_mu.real, d_mu.imag)
    return EigenMode(config.branch, lam, float(ell), float(little_l), float(mt), float(dm), grad, near)


def _branch_mode_scalar(f: FieldSample, sign: int, chi: float, strict: bool, amp: float):
    """Float-only evaluation of the FIG2/STRICT branch mass for one field point.

    Same result as :func:`mode_at` for those rules; used inside the integrator
    where array overhead dominates.  Returns (m~, grad m~ [4], Delta M, near).
    """
    e, b = f.e_vec.tolist(), f.b_vec.tolist()
    de, db = f.d_e.tolist(), f.d_b.tolist()
    edotb = e[0] * b[0] + e[1] * b[1] + e[2] * b[2]
    bb = b[0] * b[0] + b[1] * b[1] + b[2] * b[2]
    ee = e[0] * e[0] + e[1] * e[1] + e[2] * e[2]
    if abs(edotb) > 1e-10 * (bb + ee) + 1e-300:
        raise ValueError("spin_branch_ell requires fields with E.B = 0")
    d2 = bb - ee
    root = 0.5 * chi * math.sqrt(abs(d2))
    near = math.sqrt(abs(d2)) <= NULL_THRESHOLD * amp
    if near:
        d_root = [0.0] * 4
    else:
        fac = 0.5 * chi * (1.0 if d2 >= 0 else -1.0) / math.sqrt(abs(d2))
        d_root = [fac * sum(b[i] * db[i][mu] - e[i] * de[i][mu] for i in range(3)) for mu in range(4)]
    if strict and d2 < 0:
        ell, l, d_ell, d_l = 0.0, sign * root, [0.0] * 4, [sign * g for g in d_root]
    else:
        ell, l, d_ell, d_l = sign * root, 0.0, [sign * g for g in d_root], [0.0] * 4
    a = 1.0 + ell
    r = math.hypot(a, l)
    if a < 0 and l == 0:
        raise PairCreationError("1 + ell/mc^2 < 0 with vanishing l: effective mass is imaginary")
    if a >= 0:
        m2, dm2 = 0.5 * (r + a), 0.5 * l * l / (r + a)
    else:
        m2, dm2 = 0.5 * l * l / (r - a), 0.5 * (r - a)
    mt = math.sqrt(m2)
    grad = [(mt * d_ell[mu] + l * d_l[mu] / (2.0 * mt)) / (2.0 * r) for mu in range(4)]
    return mt, grad, math.sqrt(dm2), near


def _mass_fd(config: SimulationConfig, t, x, anchor) -> np.ndarray:
    h = config.fd_step
    out = np.zeros(4)
    for mu in range(4):
        d = np.zeros(4)
        d[mu] = h
        mp = mode_at(config, config.model.sample(t + d[0], x + d[1:]), anchor).mass_ratio
        mm = mode_at(config, config.model.sample(t - d[0], x - d[1:]), anchor).mass_ratio
        out[mu] = (mp - mm) / (2 * h)
    return out


def acceleration(state: TrajectoryState, f: FieldSample, mode: EigenMode, spin_on: bool = True) -> np.ndarray:
    """dv/dt from the Lorentz force plus the effective-mass gradient force."""
    v = np.asarray(state.v, float)
    gamma = lorentz_gamma(v)
    e, b = np.asarray(f.e_vec, float), np.asarray(f.b_vec, float)
    if spin_on:
        mt = mode.mass_ratio
        grad = np.asarray(mode.grad_mass, float)
    else:
        mt, grad = 1.0, np.zeros(4)
    force = e + np.cross(v, b) - v * (e @ v) - (grad[1:] + v * grad[0]) / gamma
    return force / (mt * gamma)


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

def _make_rhs(config: SimulationConfig, anchor: dict, counters: dict):
    model = config.model

    fast = config.spin in (SpinRule.FIG2, SpinRule.STRICT) and config.gradient == "analytic"
    strict = config.spin is SpinRule.STRICT

    def rhs(t, y):
        x = y[0:3]
        vx, vy, vz = y[3], y[4], y[5]
        v2 = vx * vx + vy * vy + vz * vz
        if not v2 < 1.0:
            return np.full(9, np.nan)
        gamma = 1.0 / math.sqrt(1.0 - v2)
        f, a_vec = model.sample_with_potential(t, x)
        if not config.spin_on:
            mt, grad, dm, near = 1.0, (0.0, 0.0, 0.0, 0.0), 0.0, False
        elif fast:
            mt, grad, dm, near = _branch_mode_scalar(f, config.sign, config.chi, strict, model.amp)
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NullSurfaceWarning)
                mode = mode_at(config, f, anchor.get("lam"))
                if config.gradient == "fd":
                    mode.grad_mass = _mass_fd(config, t, x, anchor.get("lam"))
            mt, grad, dm, near = mode.mass_ratio, mode.grad_mass.tolist(), mode.delta_m, mode.near_null
        if near:
            counters["near"] += 1
        ex, ey, ez = f.e_vec.tolist()
        bx, by, bz = f.b_vec.tolist()
        dz = None
        if config.correction is not None:
            de, db, dmass, dgrad, dz = config.correction(t)
            ex, ey, ez = ex + de[0], ey + de[1], ez + de[2]
            bx, by, bz = bx + db[0], by + db[1], bz + db[2]
            mt = mt + dmass
            grad = [grad[m] + dgrad[m] for m in range(4)]
        ev = ex * vx + ey * vy + ez * vz
        ig = 1.0 / gamma
        k = 1.0 / (mt * gamma)
        fx = ex + (vy * bz - vz * by) - vx * ev - (grad[1] + vx * grad[0]) * ig
        fy = ey + (vz * bx - vx * bz) - vy * ev - (grad[2] + vy * grad[0]) * ig
        fz = ez + (vx * by - vy * bx) - vz * ev - (grad[3] + vz * grad[0]) * ig
        va = vx * a_vec[0] + vy * a_vec[1] + vz * a_vec[2]
        dgam = (ev + grad[0] * ig - gamma * (grad[0] + vx * grad[1] + vy * grad[2] + vz * grad[3])) / mt
        ds = -abs(dm) * ig
        if dz is not None:
            ds = ds + (dz[0] + vx * dz[1] + vy * dz[2] + vz * dz[3])
        return np.array([vx, vy, vz, fx * k, fy * k, fz * k, mt * ig + va, ds, dgam])

    return rhs


def integrate(config: SimulationConfig, initial: TrajectoryState, t_end: float,
              sample_times: Optional[Sequence[float]] = None) -> Trajectory:
    """Integrate from ``initial`` to ``t_end``; optionally resample on ``sample_times``.

    Step-size collapse or a non-finite state ends the run early; the partial
    trajectory is returned with ``status`` and ``message`` set.
    """
    if t_end == initial.t:
        raise ValueError("t_end must differ from the initial time")
    lorentz_gamma(initial.v)
    anchor: dict = {}
    counters = {"near": 0}
    if config.spin is SpinRule.EIGEN and config.spin_on:
        anchor["lam"] = complex(eigenvalues(config.model.sample(initial.t, initial.x))[config.branch - 1])
    rhs = _make_rhs(config, anchor, counters)

    def on_step(t, y):
        if config.spin is SpinRule.EIGEN and config.spin_on:
            lam = complex(eigenvalues(config.model.sample(t, y[0:3]))[config.branch - 1])
            anchor["lam"] = track_branch(anchor["lam"], lam)
        return False

    y0 = np.concatenate([initial.x, initial.v, [initial.s_real, initial.s_imag, initial.gamma]])
    sol = ode.integrate(rhs, initial.t, y0, t_end, rtol=config.rtol, atol=config.atol,
                        max_step=config.max_step, on_step=on_step, min_step=config.min_step)
    if sample_times is not None:
        ts = np.asarray(sample_times, float)
        lo, hi = sorted((sol.t[0], sol.t[-1]))
        ts = ts[(ts >= lo) & (ts <= hi)]
        ys = sol.dense(ts)
    else:
        ts, ys = sol.t, sol.y
    v = ys[:, 3:6]
    # gamma from the velocity vs gamma carried by the energy balance: per-step
    # increments measure local consistency, the raw difference the global drift
    gam_v = 1.0 / np.sqrt(1.0 - np.sum(sol.y[:, 3:6] ** 2, axis=1))
    gam_e = sol.y[:, 8]
    gam_err = float(np.max(np.abs(np.diff(gam_e) - np.diff(gam_v)))) if len(gam_v) > 1 else 0.0
    gam_drift = float(np.max(np.abs(gam_e - gam_v)))
    masses = _masses_along(config, ts, ys[:, 0:3])
    return Trajectory(ts, ys[:, 0:3], v, ys[:, 6], ys[:, 7], masses, config,
                      sol.status, sol.message, counters["near"], gam_err, gam_drift,
                      len(sol.diagnostics), sol)


def _masses_along(config, ts, xs):
    if not config.spin_on or len(ts) == 0:
        return np.ones(len(ts))
    out = np.empty(len(ts))
    anchor = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NullSurfaceWarning)
        for i, (t, x) in enumerate(zip(ts, xs)):
            mode = mode_at(config, config.model.sample(t, x), anchor)
            anchor = mode.lam
            out[i] = mode.mass_ratio
    return out


def integrate_proper_time(config: SimulationConfig, initial: TrajectoryState, t_end: float,
                          sample_times: Optional[Sequence[float]] = None):
    """Cross-check integrator in proper time with state (t, x, u = gamma v).

    m~ du/dtau = gamma E + u x B - grad m~ - u (gamma dm~/dt + u.grad m~).
    Returns ``(t, x)`` at ``sample_times`` (or at the accepted steps).
    """
    model = config.model
    forward = t_end > initial.t

    def rhs(tau, y):
        t, x, u = y[0], y[1:4], y[4:7]
        gamma = np.sqrt(1.0 + u @ u)
        f = model.sample(t, x)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NullSurfaceWarning)
            mode = mode_at(config, f)
        g = mode.grad_mass
        dm_dtau = gamma * g[0] + u @ g[1:]
        du = (gamma * f.e_vec + np.cross(u, f.b_vec) - g[1:] - u * dm_dtau) / mode.mass_ratio
        return np.concatenate([[gamma], u, du])

    def stop(tau, y):
        return (y[0] >= t_end) if forward else (y[0] <= t_end)

    u0 = initial.gamma * np.asarray(initial.v)
    y0 = np.concatenate([[initial.t], initial.x, u0])
    tau_end = (t_end - initial.t) * 2.0
    sol = ode.integrate(rhs, 0.0, y0, tau_end, rtol=config.rtol, atol=config.atol,
                        max_step=config.max_step, on_step=stop, min_step=config.min_step)
    if sample_times is None:
        return sol.y[:, 0], sol.y[:, 1:4]
    # invert t(tau) on the monotone node set, then refine by dense output
    ts = np.asarray(sample_times, float)
    taus = np.interp(ts, sol.y[:, 0], sol.t) if forward else np.interp(ts, sol.y[::-1, 0], sol.t[::-1])
    for _ in range(3):
        ys = sol.dense(taus)
        gam = np.sqrt(1.0 + np.sum(ys[:, 4:7] ** 2, axis=1))
        taus = taus - (ys[:, 0] - ts) / gam
    ys = sol.dense(taus)
    return ys[:, 0], ys[:, 1:4]


# ---------------------------------------------------------------------------
# constants of motion and validity
# ---------------------------------------------------------------------------

def conserved_quantities(state: TrajectoryState, params: BesselBeamParams, mode=None) -> ConservedPair:
    """Helical constants of motion in the radiation gauge.

    L = m~ gamma (rho^2 dphi/dct - m_z) + (x A_y - y A_x)
    P = m~ gamma (v_z - k_z) + A_z
    ``mode`` may be an :class:`EigenMode`, a plain mass ratio, or None (m~ = 1).
    """
    if mode is None:
        mt = 1.0
    elif isinstance(mode, EigenMode):
        mt = mode.mass_ratio
    else:
        mt = float(mode)
    x, v = np.asarray(state.x, float), np.asarray(state.v, float)
    gamma = lorentz_gamma(v)
    a = vector_potential(params, state.t, x).a_vec
    lz_kin = x[0] * v[1] - x[1] * v[0]     # rho^2 dphi/dct
    big_l = mt * gamma * (lz_kin - params.m_z) + (x[0] * a[1] - x[1] * a[0])
    big_p = mt * gamma * (v[2] - params.kz) + a[2]
    return ConservedPair(float(big_l), float(big_p))


def conserved_along(traj: Trajectory):
    """Arrays (L, P) at every stored sample of a Bessel-beam trajectory."""
    model = traj.config.model
    if not isinstance(model, BesselBeam):
        raise TypeError("constants of motion are defined for Bessel-beam trajectories")
    ls, ps = [], []
    for i in range(len(traj.t)):
        st = TrajectoryState(float(traj.t[i]), traj.x[i], traj.v[i], 1.0)
        pair = conserved_quantities(st, model.params, float(traj.mass[i]))
        ls.append(pair.L)
        ps.append(pair.P)
    return np.array(ls), np.array(ps)


def field_length_scale(model: FieldModel) -> float:
    """min(1/k_perp, 1/k_z) for Bessel beams, else the reduced carrier wavelength 1."""
    if isinstance(model, BesselBeam):
        return min(1.0 / model.params.kperp, 1.0 / model.params.kz)
    return 1.0


def debroglie_check(state: TrajectoryState, config: SimulationConfig, warn_above: float = 1.0) -> float:
    """Reduced de Broglie wavelength over the field length scale, chi / (gamma |v| L).

    hbar / (m c) in units of c / omega is chi, which is all that is needed to go
    back to physical scales.  Ratios above ``warn_above`` raise a warning.
    """
    speed = float(np.linalg.norm(state.v))
    if speed == 0:
        raise ZeroDivisionError("de Broglie wavelength undefined at rest")
    ratio = config.chi / (lorentz_gamma(state.v) * speed * field_length_scale(config.model))
    if ratio >= warn_above:
        warnings.warn(f"de Broglie ratio {ratio:.3g} not small: trajectory picture questionable",
                      SemiclassicalValidityWarning, stacklevel=2)
    return ratio


# ---------------------------------------------------------------------------
# vortex-trap setup
# ---------------------------------------------------------------------------

HC_EV_NM = 1239.841984          # h c in eV nm
ELECTRON_REST_EV = 510998.95


def chi_from_wavelength(wavelength_nm: float) -> float:
    """hbar omega / m c^2 for a photon of the given wavelength."""
    return HC_EV_NM / wavelength_nm / ELECTRON_REST_EV


def vortex_trap_setup(spin: SpinRule = SpinRule.FIG2, sign: int = 1, rtol: float = 1e-10,
                      atol: float = 1e-12, wavelength_nm: float = 0.1):
    """m_z = 1 TE beam, k_perp = 0.04, amplitude 0.005, rho_0 = 0.05 wavelengths."""
    params = BesselBeamParams(m_z=1, kperp=0.04, amp_te=0.005, amp_tm=0.0)
    model = BesselBeam(params)
    cfg = SimulationConfig(model, chi_from_wavelength(wavelength_nm), spin, sign, rtol=rtol, atol=atol)
    initial = TrajectoryState.cylindrical(0.05 * 2 * np.pi, 0.0, 0.0, 0.0, -0.01, 3e-5, branch_sign=sign)
    return cfg, initial


def with_spin(config: SimulationConfig, **changes) -> SimulationConfig:
    return replace(config, **changes)

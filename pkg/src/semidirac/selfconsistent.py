"""Corrections neglected by the semiclassical trajectories, and one-step refinement.

For branch j with partner i the bispinor derivatives feed two quantities
(with d_i / d_j = -N_i / N_j for the null-safe basis and Delta = (S_i - S_j)/hbar, both complex):

    P_mu / d_j = Xi_j^dag d_mu psi_j + e^{-i Delta} (d_i/d_j) Xi_j^dag d_mu psi_i
    Q / d_j    = Xi_j^dag box psi_j  + e^{-i Delta} (d_i/d_j) Xi_j^dag box psi_i

In units where hbar -> chi (m = c = omega = 1), W_mu = Re(i chi P_mu/d_j) shifts
the lower-index potential (A_mu -> A_mu - W_mu), Im(i chi P_mu/d_j) adds to the
imaginary action, and chi^2 (Q/d_j - P.P/d_j^2) adds to ell + i l.

Near null surfaces the 1/lambda terms are damped by tanh(|lambda/amp|^4).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional
import warnings

import numpy as np

from .fields import BesselBeam, FieldModel, FieldSample
from .invariants import (Convention, NullSurfaceWarning, effective_mass, eigenvalues, mass_from_ell,
                         spin_branch_ell)
from .spinors import (PARTNER, _null_safe_parts, dual_projectors, null_safe_basis, psi_derivative)
from . import dynamics as dyn

METRIC = np.array([1.0, -1.0, -1.0, -1.0])


class UnsupportedModelError(ValueError):
    pass


@dataclass
class CorrectionSample:
    p_vec: np.ndarray          # P_mu / d_j, complex 4-vector
    q_scalar: complex          # Q / d_j
    f_eff: np.ndarray          # F^W_{mu nu} = d_mu W_nu - d_nu W_mu, real antisymmetric
    mass_shift: complex        # chi^2 (Q/d - P.P/d^2), added to ell + i l
    regulator: float = 1.0
    near_null: bool = False
    p_gauge: Optional[np.ndarray] = None    # d log(mu / (G_m N_j)), no field strength
    p_super: Optional[np.ndarray] = None    # (e^{-i Delta} - 1) term, regulated

    @property
    def w_vec(self) -> np.ndarray:
        """Real lower-index potential shift W_mu (already multiplied by chi)."""
        return self._w

    @property
    def zeta_shift(self) -> np.ndarray:
        return self._zeta


def regulator(lam, amp: float):
    """tanh(|lambda / amp|^4): -> 1 away from null surfaces, ~ |lambda/amp|^4 on them."""
    return np.tanh(np.abs(np.asarray(lam) / amp) ** 4)


def _pair(j: int):
    """0-based (j, i_j) for 1-based branch index j."""
    return j - 1, PARTNER[j - 1]


def _y_parts(f: FieldSample, j: int):
    """(X_jj, Z) with X_jj = Xi_j^dag d psi_j and Z = (N_i/N_j) Xi_j^dag d psi_i, shape [..., 4].

    Closed forms from the null-safe basis: with w = (mu - G_z)/G_m,
    X_jj = -d log N_j + (G_m / 2 mu_j) d w_j and Z = (G_m / 2 mu_j) d w_i.
    """
    jj, ii = _pair(j)
    w, dw, gm, mu = _null_safe_parts(f, jj)
    _, dwi, _, _ = _null_safe_parts(f, ii)
    nj2 = 2.0 * (1.0 + np.abs(w) ** 2)
    dlog_n = 2.0 * np.real(np.conj(w)[..., None] * dw) / nj2[..., None]
    coef = (gm / (2.0 * mu))[..., None]
    return -dlog_n + coef * dw, coef * dwi


def _centre(samples: FieldSample) -> FieldSample:
    """Stencil centres of samples shaped [..., 9]."""
    return FieldSample(samples.e_vec[..., 0, :], samples.b_vec[..., 0, :], samples.grad_e[..., 0, :, :],
                       samples.grad_b[..., 0, :, :], samples.dt_e[..., 0, :], samples.dt_b[..., 0, :])


def _flip_mask(samples: FieldSample, j: int):
    """Stencil points where the principal root jumped to -lambda relative to the centre.

    ``samples`` has shape [..., 9] with the centre at index 0 of the last axis.
    """
    lam = eigenvalues(samples)[..., j - 1]
    return np.abs(lam - lam[..., :1]) > np.abs(lam + lam[..., :1])


def _y_tracked(samples: FieldSample, j: int):
    x, z = _y_parts(samples, j)
    flip = _flip_mask(samples, j)
    if flip.any():
        xp, zp = _y_parts(samples, PARTNER[j - 1] + 1)
        x = np.where(flip[..., None], xp, x)
        z = np.where(flip[..., None], zp, z)
    return x, z


def _stencil(t, r, h):
    """Centre plus +/- h along t, x, y, z: [..., 9, 4] points (centre first); h may vary per centre."""
    t = np.asarray(t, float)
    r = np.asarray(r, float)
    centre = np.concatenate([t[..., None], r], axis=-1)
    pts = np.repeat(centre[..., None, :], 9, axis=-2)
    for mu in range(4):
        pts[..., 1 + 2 * mu, mu] += h
        pts[..., 2 + 2 * mu, mu] -= h
    return pts


def _central(vals, h):
    """d_mu of stencil values [..., 9, k] -> [..., k, 4]."""
    h = np.asarray(h, float)
    if h.ndim:
        h = h[..., None]
    return np.stack([(vals[..., 1 + 2 * mu, :] - vals[..., 2 + 2 * mu, :]) / (2 * h) for mu in range(4)], axis=-1)


def _box_projections(samples: FieldSample, h: float, j: int):
    """(Xi_j^dag box psi_j, Xi_j^dag box psi_i) at the stencil centres."""
    jj, ii = _pair(j)
    basis = null_safe_basis(_centre(samples))
    xi = dual_projectors(basis)[..., jj, :]
    flip = _flip_mask(samples, j)[..., None, None]
    dj, di = psi_derivative(samples, jj), psi_derivative(samples, ii)    # [..., 9, comp, mu]
    h = np.asarray(h, float)
    if h.ndim:
        h = h[..., None]
    out = []
    for d in (np.where(flip, di, dj), np.where(flip, dj, di)):
        box = (d[..., 1, :, 0] - d[..., 2, :, 0]) / (2 * h)
        for mu in range(1, 4):
            box = box - (d[..., 1 + 2 * mu, :, mu] - d[..., 2 + 2 * mu, :, mu]) / (2 * h)
        out.append(np.einsum("...a,...a->...", xi.conj(), box))
    return out[0], out[1]


def _fd_parts(model: FieldModel, pts, j: int, h: float):
    """(X, Z, box_j, box_i) by finite differences of the null-safe basis (with its G_m = 0 fallback).

    X, Z have shape [len(pts), 4]; the boxes are at pts[0].  The basis is unit
    normalised here, so d_i / d_j = -1 stands in for -N_i / N_j.
    """
    jj, ii = _pair(j)
    inner = _stencil(pts[:, 0], pts[:, 1:], h).reshape(-1, 4)
    samples = model.sample(inner[:, 0], inner[:, 1:])
    basis = null_safe_basis(samples).reshape(len(pts), 9, 4, 4)
    lam = eigenvalues(samples)[:, j - 1].reshape(len(pts), 9)
    flip = np.abs(lam - lam[:, :1]) > np.abs(lam + lam[:, :1])
    psi_j = np.where(flip[..., None], basis[:, :, ii], basis[:, :, jj])
    psi_i = np.where(flip[..., None], basis[:, :, jj], basis[:, :, ii])
    # fix the arbitrary phase of each stencil basis against its centre
    for psi in (psi_j, psi_i):
        ov = np.einsum("pka,pa->pk", psi.conj(), psi[:, 0])
        psi *= np.where(np.abs(ov) > 0, ov / np.abs(ov), 1.0)[..., None]
    xi = dual_projectors(basis[:, 0])[:, jj]                      # [p, 4]
    d_j = np.stack([(psi_j[:, 1 + 2 * m] - psi_j[:, 2 + 2 * m]) / (2 * h) for m in range(4)], axis=-1)
    d_i = np.stack([(psi_i[:, 1 + 2 * m] - psi_i[:, 2 + 2 * m]) / (2 * h) for m in range(4)], axis=-1)
    x = np.einsum("pa,pam->pm", xi.conj(), d_j)
    z = -np.einsum("pa,pam->pm", xi.conj(), d_i)       # so that -Z carries d_i/d_j = -1
    boxes = []
    for psi in (psi_j, psi_i):
        sec = [(psi[0, 1 + 2 * m] - 2 * psi[0, 0] + psi[0, 2 + 2 * m]) / h ** 2 for m in range(4)]
        box = sec[0] - sec[1] - sec[2] - sec[3]
        boxes.append(xi[0].conj() @ box)
    return x, z, boxes[0], boxes[1]


def _norm_ratio(f: FieldSample, j: int):
    jj, ii = _pair(j)
    w, _, _, _ = _null_safe_parts(f, jj)
    wi, _, _, _ = _null_safe_parts(f, ii)
    return np.sqrt((1.0 + np.abs(wi) ** 2) / (1.0 + np.abs(w) ** 2))


def _assemble(x_all, z_all, box_j, box_i, ratio, phase, reg, chi, h):
    """Combine stencil projections into (P, Q, F^W, mass shift, gauge part, superposition part)."""
    ph = np.asarray(phase)[..., None, None]
    rg = np.asarray(reg)[..., None, None]
    # d_i/d_j = -N_i/N_j: the Delta = 0 part X - Z is then a pure gradient
    gauge_all = x_all - z_all
    super_all = -(ph - 1.0) * z_all
    y_all = gauge_all + rg * super_all                       # [..., 9, 4]
    p_vec = y_all[..., 0, :]
    q = box_j - ratio * box_i - reg * (phase - 1.0) * ratio * box_i
    # the gauge part is a pure gradient, so its curl vanishes identically; differencing
    # it would only add noise around the zeros of G_m
    dy = _central(rg * super_all, h)                         # [..., nu, mu] = d_mu Y_nu
    w_grad = chi * np.real(1j * dy)
    f_eff = np.swapaxes(w_grad, -1, -2) - w_grad             # F_{mu nu} = d_mu W_nu - d_nu W_mu
    f_eff = np.where(np.isfinite(f_eff), f_eff, 0.0)
    pp = np.sum(METRIC * p_vec * p_vec, axis=-1)
    shift = chi ** 2 * (q - pp)
    return p_vec, q, f_eff, shift, gauge_all[..., 0, :], (rg * super_all)[..., 0, :]


def _batch_terms(model: FieldModel, t, r, j: int, delta_s, chi: float, regularize: bool, h: float,
                 reach: float = 0.05, h_min: float = 1e-5):
    """Vectorised correction terms at centres (t[n], r[n, 3]) with no G_m = 0 points.

    The stencil step is ``h``, shortened to ``reach`` times the distance to
    the nearest null surface (but not below ``h_min``).  Returns (p, q,
    f_eff, shift, reg, degenerate mask, lambda); degenerate centres hold
    garbage and must be recomputed through the finite-difference path.
    """
    h = np.clip(reach * _null_distance(model.sample(t, r), j), h_min, h)
    pts = _stencil(t, r, h)                                  # [n, 9, 4]
    samples = model.sample(pts[..., 0], pts[..., 1:])
    centre = _centre(samples)
    lam = eigenvalues(centre)[..., j - 1]
    amp = model.amp if model.amp > 0 else 1.0
    reg = regulator(lam, amp) if regularize else np.ones(lam.shape)
    g = centre.b_vec + (-1j if j < 3 else 1j) * centre.e_vec
    gnorm = np.maximum(np.linalg.norm(g, axis=-1), 1e-300)
    degenerate = np.abs(g[..., 0] - 1j * g[..., 1]) <= 1e-10 * gnorm
    with np.errstate(divide="ignore", invalid="ignore"):
        x_all, z_all = _y_tracked(samples, j)
        box_j, box_i = _box_projections(samples, h, j)
        ratio = _norm_ratio(centre, j)
        p, q, f_eff, shift, _, _ = _assemble(x_all, z_all, box_j, box_i, ratio,
                                             np.exp(-1j * np.asarray(delta_s)), reg, chi, h)
    if regularize:
        # P and Q both carry 1/lambda from d log mu and d w near null surfaces
        shift = reg * shift
    return p, q, f_eff, shift, reg, degenerate, lam


def correction_terms(model: FieldModel, t: float, r, j: int, delta_s: complex, chi: float,
                     regularize: bool = True, h: float = 1e-3) -> CorrectionSample:
    """P, Q, the effective field tensor and the mass shift for branch ``j`` at (t, r).

    ``delta_s`` is (S_i - S_j)/hbar including the imaginary action; it is held
    constant across the finite-difference stencil, as are the amplitudes d_j.
    """
    r = np.asarray(r, float)
    pts = _stencil(t, r, h)
    samples = model.sample(pts[:, 0], pts[:, 1:])
    centre = samples.take(0)
    lam = complex(eigenvalues(centre)[j - 1])
    amp = model.amp if model.amp > 0 else 1.0
    reg = float(regulator(lam, amp)) if regularize else 1.0
    near = abs(lam) < 1e-9 * amp
    if chi == 0 or (near and not regularize):
        if near and not regularize:
            warnings.warn("correction terms singular on a null surface", NullSurfaceWarning, stacklevel=2)
        zero = CorrectionSample(np.zeros(4, complex), 0j, np.zeros((4, 4)), 0j, reg, near,
                                np.zeros(4, complex), np.zeros(4, complex))
        zero._w, zero._zeta = np.zeros(4), np.zeros(4)
        return zero
    phase = np.exp(-1j * delta_s)
    g = centre.b_vec + (-1j if j < 3 else 1j) * centre.e_vec
    degenerate = abs(g[0] - 1j * g[1]) <= 1e-10 * max(np.linalg.norm(g), 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        if degenerate:
            x_all, z_all, box_j, box_i = _fd_parts(model, pts, j, h)
            ratio = 1.0
        else:
            x_all, z_all = _y_tracked(samples, j)
            box_j, box_i = _box_projections(samples, h, j)
            ratio = float(_norm_ratio(centre, j))
        p_vec, q, f_eff, shift, gauge, sup = _assemble(x_all, z_all, box_j, box_i, ratio, phase, reg, chi, h)
    if regularize:
        shift = reg * shift
    out = CorrectionSample(p_vec, complex(q), f_eff, complex(shift), reg, near, gauge, sup)
    out._w = chi * np.real(1j * p_vec)
    out._zeta = chi * np.imag(1j * p_vec)
    return out


# ---------------------------------------------------------------------------
# effective field tensor
# ---------------------------------------------------------------------------

def _g_l_gradients(f: FieldSample, j: int):
    """g = G_z/mu and L = log(mu/G_m) with their spacetime gradients (G-/G+ by branch)."""
    jj, _ = _pair(j)
    sgn = -1j if jj < 2 else 1j
    g = f.b_vec + sgn * f.e_vec
    dg = f.d_b + sgn * f.d_e
    lam = eigenvalues(f)[..., 0 if jj < 2 else 2]
    mu = lam if jj % 2 == 0 else -lam
    dmu = np.einsum("...i,...im->...m", g, dg) / mu[..., None]
    gz, dgz = g[..., 2], dg[..., 2, :]
    gm = g[..., 0] - 1j * g[..., 1]
    dgm = dg[..., 0, :] - 1j * dg[..., 1, :]
    ratio = gz / mu
    d_ratio = dgz / mu[..., None] - (gz / mu ** 2)[..., None] * dmu
    d_log = dmu / mu[..., None] - dgm / gm[..., None]
    return ratio, d_ratio, d_log, lam, gm


def _require_te(f: FieldSample):
    scale = np.sqrt(np.sum(f.e_vec ** 2, axis=-1) + np.sum(f.b_vec ** 2, axis=-1))
    if np.any(np.abs(f.e_vec[..., 2]) > 1e-12 * scale + 1e-300):
        raise UnsupportedModelError("closed-form effective tensor is derived for TE modes (E_z = 0)")


def effective_tensor(f: FieldSample, j: int = 1, regularize: bool = True, amp: Optional[float] = None,
                     form: str = "exact", kz: Optional[float] = None) -> np.ndarray:
    """F^{(j:j)}_{mu nu} = Re[i (d_nu X_mu - d_mu X_nu)], X_mu = Xi_j^dag d_mu psi_j (units hbar c/q).

    ``form="exact"``: only the non-gradient part of X contributes, giving
    F_{mu nu} = Re[-(i/2)(d_nu g d_mu L - d_mu g d_nu L)] with g = G_z/mu and
    L = log(mu/G_m).  ``form="phase"``: the reduced TE expression of
    :func:`effective_tensor_phase_form` (needs ``kz``), kept for comparison.

    With ``regularize`` the result is multiplied by tanh(|lambda/amp|^4),
    which takes it to zero on null surfaces.
    """
    _require_te(f)
    if form == "exact":
        with np.errstate(divide="ignore", invalid="ignore"):
            _, d_g, d_l, lam, _ = _g_l_gradients(f, j)
            outer = np.einsum("...n,...m->...mn", d_g, d_l)      # [mu, nu] = d_nu g d_mu L
            tensor = np.real(-0.5j * (outer - np.swapaxes(outer, -1, -2)))
    elif form == "phase":
        if kz is None:
            raise ValueError("the phase form needs kz")
        with np.errstate(divide="ignore", invalid="ignore"):
            tensor = effective_tensor_phase_form(f, kz)
        lam = eigenvalues(f)[..., 0]
    else:
        raise ValueError("form must be 'exact' or 'phase'")
    if regularize:
        if amp is None:
            raise ValueError("regularization needs the TE amplitude")
        reg = regulator(lam, amp)
        tensor = np.where(np.isfinite(tensor), tensor, 0.0) * np.asarray(reg)[..., None, None]
    return tensor


def effective_tensor_phase_form(f: FieldSample, kz: float) -> np.ndarray:
    """Reference TE form 2(1 - k_z^2) antisym[d_mu phi_- d_nu (G_z/lambda)], e^{i phi_-} = G_m/|G_m|."""
    _require_te(f)
    g = f.b_vec - 1j * f.e_vec
    dg = f.d_b - 1j * f.d_e
    gm = g[..., 0] - 1j * g[..., 1]
    dgm = dg[..., 0, :] - 1j * dg[..., 1, :]
    d_phi = np.imag(dgm / gm[..., None])
    lam = eigenvalues(f)[..., 0]
    dlam = np.einsum("...i,...im->...m", g, dg) / lam[..., None]
    d_ratio = dg[..., 2, :] / lam[..., None] - (g[..., 2] / lam ** 2)[..., None] * dlam
    outer = np.einsum("...m,...n->...mn", d_phi, d_ratio)
    return np.real(2.0 * (1.0 - kz ** 2) * (outer - np.swapaxes(outer, -1, -2)))


def effective_tensor_numeric(model: FieldModel, t: float, r, j: int = 1, h: float = 1e-4) -> np.ndarray:
    """Definition-level F^{(j:j)}: central differences of the projection X_mu = Xi_j^dag d_mu psi_j."""
    pts = _stencil(t, np.asarray(r, float), h)
    samples = model.sample(pts[:, 0], pts[:, 1:])
    x_all, _ = _y_tracked(samples, j)
    dx = _central(x_all, h)                   # [mu(X index), nu(derivative)]
    return np.real(1j * (dx - dx.T))          # d_nu X_mu - d_mu X_nu


# ---------------------------------------------------------------------------
# iteration
# ---------------------------------------------------------------------------

@dataclass
class CorrectionTrack:
    """Correction forces sampled along a trajectory, interpolated in time."""
    t: np.ndarray
    d_e: np.ndarray        # [n, 3]
    d_b: np.ndarray        # [n, 3]
    d_mass: np.ndarray     # [n]
    d_grad: np.ndarray     # [n, 4]
    d_zeta: np.ndarray     # [n, 4]

    def __call__(self, t: float):
        ts = self.t
        if len(ts) == 1 or t <= ts[0]:
            c = self._columns[0]
        elif t >= ts[-1]:
            c = self._columns[-1]
        else:
            k = int(np.searchsorted(ts, t, side="right")) - 1
            s = (t - ts[k]) / (ts[k + 1] - ts[k])
            c = self._columns[k] + s * (self._columns[k + 1] - self._columns[k])
        c = c.tolist()
        return c[0:3], c[3:6], c[6], c[7:11], c[11:15]

    def __post_init__(self):
        self._columns = np.column_stack([self.d_e, self.d_b, self.d_mass, self.d_grad, self.d_zeta])

    @classmethod
    def zeros(cls, t):
        n = len(t)
        return cls(np.asarray(t), np.zeros((n, 3)), np.zeros((n, 3)), np.zeros(n), np.zeros((n, 4)), np.zeros((n, 4)))

    @property
    def max_field(self) -> float:
        return float(max(np.abs(self.d_e).max(initial=0), np.abs(self.d_b).max(initial=0)))


def _ell_batch(config: dyn.SimulationConfig, f: FieldSample):
    """Base (ell, l) of the configured spin rule, batched (no branch anchoring)."""
    if config.spin in (dyn.SpinRule.FIG2, dyn.SpinRule.STRICT):
        return spin_branch_ell(f, config.sign, config.chi, Convention(config.spin.value))
    lam = eigenvalues(f)[..., config.branch - 1]
    ell, little_l, _, _ = effective_mass(lam, config.chi)
    return ell, little_l


def corrections_along(config: dyn.SimulationConfig, traj: dyn.Trajectory, partner: dyn.Trajectory,
                      j: int, times, regularize: bool = True, h: float = 1e-3, hm: float = 1e-2,
                      reach: float = 0.05, chunk: int = 64) -> CorrectionTrack:
    """Evaluate effective E, B, mass and imaginary-action shifts at ``times`` along ``traj``.

    The mass shift gradient comes from an outer stencil of step ``hm`` around
    each trajectory point, shortened to ``reach`` times the local distance to
    the nearest null surface so that it never straddles one; Delta S is taken
    from ``partner`` at equal times.
    """
    times = np.asarray(times, float)
    if config.chi == 0 or not config.spin_on:
        return CorrectionTrack.zeros(times)
    ya = traj.solution.dense(times)
    yb = partner.solution.dense(times)
    chi = config.chi
    model = config.model
    n = len(times)
    delta_all = ((yb[:, 6] - ya[:, 6]) + 1j * (yb[:, 7] - ya[:, 7])) / chi
    d_e, d_b = np.zeros((n, 3)), np.zeros((n, 3))
    d_m, d_g, d_z = np.zeros(n), np.zeros((n, 4)), np.zeros((n, 4))
    for lo in range(0, n, chunk):
        sl = slice(lo, min(lo + chunk, n))
        step = np.clip(reach * _null_distance(model.sample(times[sl], ya[sl, 0:3]), j), 1e-6, hm)
        outer = _stencil(times[sl], ya[sl, 0:3], step)           # [c, 9, 4]
        delta = np.repeat(delta_all[sl, None], 9, axis=1)
        p, _, f_eff, shift, _, degenerate, _ = _batch_terms(model, outer[..., 0], outer[..., 1:], j,
                                                            delta, chi, regularize, h)
        for idx in zip(*np.nonzero(degenerate)):
            pt = outer[idx]
            cs = correction_terms(model, pt[0], pt[1:], j, delta[idx], chi, regularize, h)
            p[idx], f_eff[idx], shift[idx] = cs.p_vec, cs.f_eff, cs.mass_shift
        shift = np.where(np.isfinite(shift), shift, 0.0)
        f = model.sample(outer[..., 0], outer[..., 1:])
        ell, little_l = _ell_batch(config, f)
        base = mass_from_ell(ell, little_l)[2]
        new = mass_from_ell(ell + shift.real, little_l + shift.imag)[2]
        dmass = new - base                                        # [c, 9]
        fw = f_eff[:, 0]
        # lower-index A_mu -> A_mu - W_mu: delta phi = -W_0, delta A_i = W_i, so
        # delta E_i = d_i W_0 - d_t W_i = F^W_{i0} and delta B = curl W
        d_e[sl] = np.stack([fw[:, 1, 0], fw[:, 2, 0], fw[:, 3, 0]], axis=-1)
        d_b[sl] = np.stack([fw[:, 2, 3], fw[:, 3, 1], fw[:, 1, 2]], axis=-1)
        d_z[sl] = chi * np.imag(1j * np.where(np.isfinite(p[:, 0]), p[:, 0], 0.0))
        d_m[sl] = dmass[:, 0]
        d_g[sl] = _central(dmass[..., None], step)[:, 0, :]
    return CorrectionTrack(times, d_e, d_b, d_m, d_g, d_z)


def _null_distance(f: FieldSample, j: int) -> np.ndarray:
    """|lambda^2| / |d lambda^2|: distance to the nearest null surface, lambda^2 being linear across it."""
    g = f.b_vec + (-1j if j < 3 else 1j) * f.e_vec
    dg = f.d_b + (-1j if j < 3 else 1j) * f.d_e
    lam2 = np.einsum("...i,...i->...", g, g)
    d_lam2 = 2.0 * np.einsum("...i,...im->...m", g, dg)
    with np.errstate(divide="ignore", invalid="ignore"):
        dist = np.abs(lam2) / np.linalg.norm(d_lam2, axis=-1)
    return np.where(np.isfinite(dist), dist, np.inf)


@dataclass
class IterationReport:
    base: dyn.Trajectory
    partner: dyn.Trajectory
    trajectories: list
    deviations: list               # max |x_new - x_old| per iteration
    converged: bool
    corrections: list = field(default_factory=list)
    message: str = ""


def _branch_config(config: dyn.SimulationConfig, j: int) -> dyn.SimulationConfig:
    """Branch j = 1, 2 maps to FIG2/STRICT signs +1, -1; EIGEN uses j directly."""
    if config.spin is dyn.SpinRule.EIGEN:
        return dyn.with_spin(config, branch=j)
    return dyn.with_spin(config, sign=1 if j in (1, 3) else -1)


def iterate(config: dyn.SimulationConfig, initial: dyn.TrajectoryState, t_end: float, j: int = 1,
            max_iters: int = 1, threshold: float = 1e-6, dt_sample: float = 0.25,
            regularize: bool = True, zero_corrections: bool = False) -> IterationReport:
    """Refine branch ``j`` with the neglected terms, re-integrating against the previous pass.

    Step (iv) evaluates corrections along the current trajectory; step (v)
    compares positions with the previous pass and stops below ``threshold``
    (units c/omega) or after ``max_iters`` passes.
    """
    cfg_j = _branch_config(config, j)
    cfg_i = _branch_config(config, PARTNER[j - 1] + 1)
    base = dyn.integrate(cfg_j, initial, t_end)
    partner = dyn.integrate(cfg_i, initial, t_end)
    times = np.arange(initial.t, t_end + 0.5 * dt_sample, dt_sample)
    times = times[times <= t_end]
    current = base
    history, trajs, tracks = [], [], []
    converged = False
    for _ in range(max_iters):
        if zero_corrections:
            track = CorrectionTrack.zeros(times)
        else:
            track = corrections_along(cfg_j, current, partner, j, times, regularize)
        tracks.append(track)
        new = integrate_corrected(cfg_j, initial, t_end, track)
        common = times
        dev = float(np.max(np.linalg.norm(new.solution.dense(common)[:, 0:3]
                                          - current.solution.dense(common)[:, 0:3], axis=1)))
        history.append(dev)
        trajs.append(new)
        current = new
        if dev < threshold:
            converged = True
            break
    msg = "converged" if converged else f"not converged after {max_iters} iteration(s); deviations {history}"
    return IterationReport(base, partner, trajs, history, converged, tracks, msg)


def integrate_corrected(config: dyn.SimulationConfig, initial: dyn.TrajectoryState, t_end: float,
                        track: Optional[CorrectionTrack]) -> dyn.Trajectory:
    """Integrate with the correction forces of ``track`` added to the field and the mass."""
    return dyn.integrate(dyn.with_spin(config, correction=track), initial, t_end)


# ---------------------------------------------------------------------------
# Pauli wavefunction and residual audit
# ---------------------------------------------------------------------------

@dataclass
class PauliAssembly:
    t: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    s_eff: np.ndarray          # [n, 2] complex actions in units of hbar
    y_plus: np.ndarray
    y_minus: np.ndarray
    psi: np.ndarray            # [n, 4]


def assemble_pauli(traj1: dyn.Trajectory, traj2: dyn.Trajectory, times=None, d1: complex = 1.0) -> PauliAssembly:
    """Psi_P ~ N_P (phi_P, phi_P) with phi_P = (Y_- G_m/lambda, -Y_+ - Y_- G_z/lambda).

    Positions are taken from ``traj1``; the 1/lambda ratios are damped by the
    tanh regulator near null surfaces.
    """
    chi = traj1.config.chi
    if chi == 0:
        raise ZeroDivisionError("Pauli assembly needs chi > 0 (actions in units of hbar)")
    times = traj1.t if times is None else np.asarray(times, float)
    ya = traj1.solution.dense(times)
    yb = traj2.solution.dense(times)
    s1 = (ya[:, 6] + 1j * ya[:, 7]) / chi
    s2 = (yb[:, 6] + 1j * yb[:, 7]) / chi
    e1, e2 = np.exp(-1j * s1), np.exp(-1j * s2)
    y_plus, y_minus = e1 + e2, e1 - e2
    model = traj1.config.model
    amp = model.amp if model.amp > 0 else 1.0
    f = model.sample(times, ya[:, 0:3])
    g = f.b_vec - 1j * f.e_vec
    lam = eigenvalues(f)[:, 0]
    reg = regulator(lam, amp)
    safe = np.where(np.abs(lam) > 0, lam, 1.0)
    gm = g[:, 0] - 1j * g[:, 1]
    upper = y_minus * gm * reg / safe
    lower = -y_plus - y_minus * g[:, 2] * reg / safe
    phi = np.stack([upper, lower], axis=-1)
    psi = np.concatenate([phi, phi], axis=-1) / np.sqrt(2.0)
    w1, _, _, _ = _null_safe_parts(f, 0)
    w2, _, _, _ = _null_safe_parts(f, 1)
    n1 = np.sqrt(2 * (1 + np.abs(w1) ** 2))
    n2 = np.sqrt(2 * (1 + np.abs(w2) ** 2))
    d1a = np.full(len(times), complex(d1))
    return PauliAssembly(times, d1a, d1a * n2 / n1, np.stack([s1, s2], axis=-1), y_plus, y_minus, psi)


@dataclass
class ResidualReport:
    t: np.ndarray
    spin_term: np.ndarray          # |ell + i l| (units m c^2)
    p_term: np.ndarray             # |2 chi pi.P/d|
    p_super_term: np.ndarray       # |2 chi pi.P_super/d|, the part a phase choice cannot remove
    q_term: np.ndarray             # |chi^2 Q/d|
    pp_term: np.ndarray            # |chi^2 P.P/d^2|
    divergence_term: np.ndarray    # |chi d^mu pi_mu|, from a neighbour bundle (nan if not computed)
    scale: float = 1.0             # (m c)^2 in these units

    def ratios(self) -> dict:
        return {k: float(np.nanmax(getattr(self, k)) / self.scale)
                for k in ("spin_term", "p_term", "p_super_term", "q_term", "pp_term", "divergence_term")
                if np.any(np.isfinite(getattr(self, k)))}


def residual_audit(traj: dyn.Trajectory, times=None, j: int = 1, bundle: Optional[float] = None,
                   partner: Optional[dyn.Trajectory] = None) -> ResidualReport:
    """Magnitudes of the terms dropped from the second-order equation along ``traj``.

    ``partner`` supplies the other branch's actions for Delta S (zero if absent,
    in which case the superposition part of P vanishes).
    ``bundle``: if given, three neighbour trajectories displaced by this amount
    in x, y, z estimate the divergence d^mu pi_mu of the momentum field.
    """
    config = traj.config
    chi = config.chi
    times = traj.t if times is None else np.asarray(times, float)
    ys = traj.solution.dense(times)
    n = len(times)
    spin, pterm, qterm, ppterm = np.zeros(n), np.zeros(n), np.zeros(n), np.zeros(n)
    psup = np.zeros(n)
    delta = np.zeros(n, complex) if partner is None else \
        ((partner.solution.dense(times)[:, 6] - ys[:, 6]) + 1j * (partner.solution.dense(times)[:, 7] - ys[:, 7])) / max(chi, 1e-300)
    div = np.full(n, np.nan)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NullSurfaceWarning)
        for k, t in enumerate(times):
            x, v = ys[k, 0:3], ys[k, 3:6]
            f = config.model.sample(t, x)
            mode = dyn.mode_at(config, f)
            spin[k] = abs(mode.ell + 1j * mode.little_l)
            if chi == 0 or not config.spin_on:
                continue
            cs = correction_terms(config.model, t, x, j, delta[k], chi, True)
            gamma = 1.0 / np.sqrt(1.0 - v @ v)
            pi_up = mode.mass_ratio * gamma * np.concatenate([[1.0], v])   # pi^mu
            pterm[k] = abs(2 * chi * pi_up @ cs.p_vec)
            psup[k] = abs(2 * chi * pi_up @ cs.p_super)
            qterm[k] = abs(chi ** 2 * cs.q_scalar)
            ppterm[k] = abs(chi ** 2 * np.sum(METRIC * cs.p_vec ** 2))
    if bundle is not None and chi > 0:
        div = chi * np.abs(_momentum_divergence(traj, times, bundle))
    elif chi == 0:
        div = np.zeros(n)
    return ResidualReport(times, spin, pterm, psup, qterm, ppterm, div)


def _momentum_divergence(traj: dyn.Trajectory, times, delta: float):
    """d_mu pi^mu of the momentum field pi^mu = m~ gamma (1, v), from displaced neighbours.

    Three neighbours started at x0 + delta e_a give the flow Jacobian
    dx/dx0 and dv/dx0, hence the velocity gradient at fixed time.  The
    effective mass enters through its value along the path only.
    """
    config = traj.config
    st0 = traj.state(0)
    t_end = float(traj.t[-1])
    base = traj.solution.dense(times)
    jac_x = np.zeros((len(times), 3, 3))
    jac_v = np.zeros((len(times), 3, 3))
    for a in range(3):
        dx = np.zeros(3)
        dx[a] = delta
        nb = dyn.integrate(config, dyn.TrajectoryState.from_velocity(st0.t, st0.x + dx, st0.v), t_end)
        ynb = nb.solution.dense(times)
        jac_x[:, :, a] = (ynb[:, 0:3] - base[:, 0:3]) / delta
        jac_v[:, :, a] = (ynb[:, 3:6] - base[:, 3:6]) / delta
    out = np.zeros(len(times))
    for k, t in enumerate(times):
        x, v = base[k, 0:3], base[k, 3:6]
        grad_v = jac_v[k] @ np.linalg.inv(jac_x[k])      # [i, m] = d v_i / d x_m at fixed t
        gamma = 1.0 / np.sqrt(1.0 - v @ v)
        f = config.model.sample(t, x)
        mode = dyn.mode_at(config, f)
        mt = mode.mass_ratio
        # e = m~ gamma: d_t e|_x = de/dt along the path - v . grad e
        acc = dyn.acceleration(dyn.TrajectoryState(t, x, v, gamma), f, mode, config.spin_on)
        grad_gamma = gamma ** 3 * (v @ grad_v)
        grad_m = np.asarray(mode.grad_mass, float)
        de_path = mt * gamma ** 3 * (v @ acc) + gamma * (grad_m[0] + v @ grad_m[1:])
        grad_e = mt * grad_gamma + gamma * grad_m[1:]
        div_p = mt * gamma * np.trace(grad_v) + v @ grad_e
        out[k] = (de_path - v @ grad_e) + div_p
    return out

"""Eigenvalues of the spin-field operator and the effective-mass scalars.

The operator's eigenvalues are the square roots of the complex invariants
G.G with G = B -/+ iE.  Multiplied by the Bohr magneton they split into a real
part ``ell`` and an imaginary part ``little_l`` (both in units of m c^2, with
mu_B * lambda = (chi / 2) * lambda for fields in m c omega / q), which set the
effective mass and the imaginary-action mass scale.

Spacetime index order everywhere is (t, x, y, z), derivatives with respect to
the contravariant coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
import warnings

import numpy as np

from .fields import FieldSample

NULL_THRESHOLD = 1e-9   # |lambda| below this * amp is treated as on a null surface
CROSS_TOLERANCE = 1e-10


class PairCreationError(ArithmeticError):
    """Effective mass squared would be negative: 1 + ell < 0 with l = 0."""


class NullSurfaceWarning(RuntimeWarning):
    pass


class Convention(str, Enum):
    FIG2 = "FIG2"      # ell = sign * mu_B sqrt|Delta^2| everywhere, l = 0
    STRICT = "STRICT"  # real/imaginary split of the eigenvalue
    EIGEN = "EIGEN"    # full complex eigenvalue lambda_- with branch tracking


@dataclass
class GVectors:
    g_plus: np.ndarray
    g_minus: np.ndarray


@dataclass
class EigenMode:
    branch: int
    lam: complex
    ell: float
    little_l: float
    mass_ratio: float
    delta_m: float
    grad_mass: np.ndarray
    near_null: bool = False


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def g_vectors(f: FieldSample) -> GVectors:
    return GVectors(f.b_vec + 1j * f.e_vec, f.b_vec - 1j * f.e_vec)


def field_invariants(f: FieldSample):
    """Return (B.B - E.E, E.B)."""
    return _dot(f.b_vec, f.b_vec) - _dot(f.e_vec, f.e_vec), _dot(f.e_vec, f.b_vec)


def eigenvalues(f: FieldSample) -> np.ndarray:
    """The four eigenvalues ordered (lambda_-, -lambda_-, lambda_+, -lambda_+).

    lambda_-/+ are principal square roots of G-/+ . G-/+; last axis has length 4.
    """
    g = g_vectors(f)
    lm = np.sqrt(_dot(g.g_minus, g.g_minus).astype(complex))
    lp = np.sqrt(_dot(g.g_plus, g.g_plus).astype(complex))
    return np.stack([lm, -lm, lp, -lp], axis=-1)


def track_branch(previous: complex, candidate: complex) -> complex:
    """Pick +/- candidate, whichever lies closer to the previous eigenvalue."""
    if abs(-candidate - previous) < abs(candidate - previous):
        return -candidate
    return candidate


def lambda_gradient(f: FieldSample, lam, which: str = "minus") -> np.ndarray:
    """d lambda / d x^mu = G . dG / lambda for the G-/+ pair (last axis: t, x, y, z)."""
    sgn = -1j if which == "minus" else 1j
    g = f.b_vec + sgn * f.e_vec
    dg = f.d_b + sgn * f.d_e
    lam = np.asarray(lam, complex)
    return np.einsum("...i,...im->...m", g, dg) / lam[..., None]


def effective_mass(lam, chi: float):
    """Split mu_B*lambda and return (ell, little_l, mass_ratio, delta_m).

    ``lam`` is in units of m c omega / q, ``chi`` = hbar omega / m c^2.
    """
    if chi < 0:
        raise ValueError("chi must be non-negative")
    mu_lam = 0.5 * chi * np.asarray(lam, complex)
    return mass_from_ell(mu_lam.real, mu_lam.imag)


def mass_from_ell(ell, little_l):
    """Effective-mass ratio and Delta M / m from (ell, l) in units of m c^2."""
    ell = np.asarray(ell, float)
    little_l = np.asarray(little_l, float)
    a = 1.0 + ell
    r = np.hypot(a, little_l)
    if np.any((a < 0) & (little_l == 0)):
        raise PairCreationError("1 + ell/mc^2 < 0 with vanishing l: effective mass is imaginary")
    l2 = little_l * little_l
    # cancellation-free forms of (r + a)/2 and (r - a)/2
    with np.errstate(divide="ignore", invalid="ignore"):
        m2 = np.where(a >= 0, 0.5 * (r + a), 0.5 * l2 / (r - a))
        dm2 = np.where(a >= 0, 0.5 * l2 / (r + a), 0.5 * (r - a))
    return ell, little_l, np.sqrt(m2), np.sqrt(dm2)


def mass_gradient_from(ell, little_l, d_ell, d_l):
    """Exact chain rule: d m~ = [m~ d ell + (l / 2 m~) d l] / (2 sqrt((1+ell)^2 + l^2))."""
    _, _, mt, _ = mass_from_ell(ell, little_l)
    r = np.hypot(1.0 + np.asarray(ell), little_l)
    mt = np.asarray(mt)[..., None]
    r = np.asarray(r)[..., None]
    return (mt * d_ell + (np.asarray(little_l)[..., None] / (2.0 * mt)) * d_l) / (2.0 * r)


def mass_gradient_small_field(little_l, d_ell, d_l):
    """Approximation valid far from pair creation: (d ell + l d l / 2) / 2."""
    return 0.5 * (d_ell + 0.5 * np.asarray(little_l)[..., None] * d_l)


def mass_gradient(f: FieldSample, chi: float, branch: int = 1, amp: float = 1.0) -> np.ndarray:
    """d(m~/m)/dx^mu for eigen-branch ``branch`` (1..4) of the operator.

    Near a null surface (|lambda| < 1e-9 amp) the gradient diverges; the result
    is then replaced by zeros and a :class:`NullSurfaceWarning` is issued.
    """
    lam_all = eigenvalues(f)
    lam = lam_all[..., branch - 1]
    if chi == 0:
        return np.zeros(np.shape(lam) + (4,))
    which = "minus" if branch in (1, 2) else "plus"
    near = np.abs(lam) <= NULL_THRESHOLD * amp
    safe = np.where(near, 1.0, lam)
    dlam = lambda_gradient(f, safe, which)
    d_mu = 0.5 * chi * dlam
    mu = 0.5 * chi * lam
    grad = mass_gradient_from(mu.real, mu.imag, d_mu.real, d_mu.imag)
    if np.any(near):
        warnings.warn("mass gradient evaluated on a null surface", NullSurfaceWarning, stacklevel=2)
        grad = np.where(np.asarray(near)[..., None], 0.0, grad)
    return grad


def eigen_mode(f: FieldSample, chi: float, branch: int = 1, amp: float = 1.0) -> EigenMode:
    lam = complex(eigenvalues(f)[branch - 1])
    ell, l, mt, dm = effective_mass(lam, chi)
    return EigenMode(branch, lam, float(ell), float(l), float(mt), float(dm),
                     mass_gradient(f, chi, branch, amp),
                     near_null=abs(lam) <= NULL_THRESHOLD * amp)


def _require_cross_free(f: FieldSample):
    delta2, edotb = field_invariants(f)
    scale = _dot(f.b_vec, f.b_vec) + _dot(f.e_vec, f.e_vec)
    if np.any(np.abs(edotb) > CROSS_TOLERANCE * scale + 1e-300):
        raise ValueError("spin_branch_ell requires fields with E.B = 0")
    return delta2


def spin_branch_ell(f: FieldSample, sign: int, chi: float, convention: Convention = Convention.FIG2):
    """(ell, l) for the +/- spin branch of an E.B = 0 field, in units of m c^2."""
    delta2 = _require_cross_free(f)
    root = 0.5 * chi * np.sqrt(np.abs(delta2))
    convention = Convention(convention)
    if convention is Convention.FIG2:
        return sign * root, np.zeros_like(root)
    if convention is Convention.STRICT:
        real = delta2 >= 0
        return np.where(real, sign * root, 0.0), np.where(real, 0.0, sign * root)
    raise ValueError(f"spin_branch_ell does not handle convention {convention}")


def spin_branch_gradient(f: FieldSample, sign: int, chi: float,
                         convention: Convention = Convention.FIG2, amp: float = 1.0):
    """Gradients of (ell, l) for :func:`spin_branch_ell`; zero (flagged) on null surfaces."""
    delta2 = _require_cross_free(f)
    d_delta2 = 2.0 * (np.einsum("...i,...im->...m", f.b_vec, f.d_b)
                      - np.einsum("...i,...im->...m", f.e_vec, f.d_e))
    absd = np.abs(delta2)
    near = np.sqrt(absd) <= NULL_THRESHOLD * amp
    safe = np.where(near, 1.0, absd)
    # d sqrt|D| = sgn(D) dD / (2 sqrt|D|)
    d_root = (0.5 * chi * np.sign(delta2) / (2.0 * np.sqrt(safe)))[..., None] * d_delta2
    d_root = np.where(np.asarray(near)[..., None], 0.0, d_root)
    zero = np.zeros_like(d_root)
    convention = Convention(convention)
    if convention is Convention.FIG2:
        return sign * d_root, zero, bool(np.any(near))
    real = (delta2 >= 0)[..., None]
    # on the imaginary side d sqrt(-D) = -dD / (2 sqrt(-D)) = sgn(D) dD / (2 sqrt|D|)
    return (np.where(real, sign * d_root, 0.0), np.where(real, 0.0, sign * d_root),
            bool(np.any(near)))

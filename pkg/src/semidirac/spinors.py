"""Spinor algebra for the spin-field operator.

Conventions
-----------
The operator matrix is ``[[s.B, -i s.E], [-i s.E, s.B]]`` (``s`` the Pauli
vector), whose eigenvalues are +/-sqrt(G.G) with G- = B - iE on bispinors with
equal upper and lower blocks and G+ = B + iE on bispinors with opposite blocks.
It equals -1/2 Sigma^{mu nu} F_{mu nu} built from the gamma matrices below with
F_{0i} = -E_i and F_{ij} = -eps_{ijk} B_k.

Basis index j runs 1..4 with eigenvalues (lambda_-, -lambda_-, lambda_+,
-lambda_+) and partner index i_j = (2, 1, 4, 3).  Bispinors are stored as the
last axis (length 4); a basis is an array ``[..., j, 4]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import FieldSample, FieldModel
from .invariants import eigenvalues

SIGMA = np.array([[[0, 1], [1, 0]],
                  [[0, -1j], [1j, 0]],
                  [[1, 0], [0, -1]]], dtype=complex)
I2 = np.eye(2, dtype=complex)
Z2 = np.zeros((2, 2), dtype=complex)

GAMMA0 = np.block([[I2, Z2], [Z2, -I2]])
GAMMA = np.array([np.block([[Z2, -s], [s, Z2]]) for s in SIGMA])
GAMMAS = np.concatenate([GAMMA0[None], GAMMA])  # gamma^mu, mu = 0..3
METRIC = np.diag([1.0, -1.0, -1.0, -1.0])

PARTNER = (1, 0, 3, 2)        # zero-based i_j
BLOCK_SIGN = (1, 1, -1, -1)   # lower block = sign * upper block


class BasisDegeneracyError(ArithmeticError):
    """Bloch vector aligned so that a basis bispinor vanishes."""


class LinearDependenceError(ArithmeticError):
    """Partner bispinors are (numerically) parallel; dual projectors undefined."""


def sigma_munu(mu: int, nu: int) -> np.ndarray:
    """Spin tensor (i/2)[gamma^mu, gamma^nu]."""
    a, b = GAMMAS[mu], GAMMAS[nu]
    return 0.5j * (a @ b - b @ a)


def sigma_dot(v) -> np.ndarray:
    """Pauli contraction s.v for (batched) complex 3-vectors -> [..., 2, 2]."""
    return np.einsum("...i,iab->...ab", np.asarray(v), SIGMA)


def sigma_f_matrix(f: FieldSample) -> np.ndarray:
    """The 4x4 operator with diagonal blocks s.B and off-diagonal blocks -i s.E."""
    sb = sigma_dot(f.b_vec.astype(complex))
    se = -1j * sigma_dot(f.e_vec.astype(complex))
    top = np.concatenate([sb, se], axis=-1)
    bottom = np.concatenate([se, sb], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def field_tensor(f: FieldSample) -> np.ndarray:
    """F_{mu nu} with the sign convention matched to :func:`sigma_f_matrix`."""
    e, b = np.asarray(f.e_vec, float), np.asarray(f.b_vec, float)
    F = np.zeros(e.shape[:-1] + (4, 4))
    for i in range(3):
        F[..., 0, i + 1] = -e[..., i]
        F[..., i + 1, 0] = e[..., i]
    eps = _levi_civita()
    F[..., 1:, 1:] = -np.einsum("ijk,...k->...ij", eps, b)
    return F


def _levi_civita():
    eps = np.zeros((3, 3, 3))
    eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1.0
    eps[0, 2, 1] = eps[2, 1, 0] = eps[1, 0, 2] = -1.0
    return eps


def sigma_f_from_gammas(f: FieldSample) -> np.ndarray:
    """-1/2 Sigma^{mu nu} F_{mu nu}, contracted explicitly from the gamma matrices."""
    F = field_tensor(f)
    out = np.zeros(F.shape[:-2] + (4, 4), complex)
    for mu in range(4):
        for nu in range(4):
            out += -0.5 * F[..., mu, nu, None, None] * sigma_munu(mu, nu)
    return out


# ---------------------------------------------------------------------------
# Bloch-parametrised spinors
# ---------------------------------------------------------------------------

@dataclass
class BlochSpinorPair:
    theta_b: float
    phi_b: float

    @property
    def alpha(self) -> np.ndarray:
        t, p = self.theta_b, self.phi_b
        return np.array([np.exp(-0.5j * p) * np.cos(t / 2), np.exp(0.5j * p) * np.sin(t / 2)])

    @property
    def beta(self) -> np.ndarray:
        t, p = self.theta_b, self.phi_b
        return np.array([-np.exp(-0.5j * p) * np.sin(t / 2), np.exp(0.5j * p) * np.cos(t / 2)])

    @property
    def n(self) -> np.ndarray:
        t, p = self.theta_b, self.phi_b
        return np.array([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)])

    @property
    def g(self) -> np.ndarray:
        """alpha^dagger s beta, evaluated directly."""
        return np.einsum("a,iab,b->i", self.alpha.conj(), SIGMA, self.beta)

    @classmethod
    def from_vector(cls, n) -> "BlochSpinorPair":
        n = np.asarray(n, float)
        n = n / np.linalg.norm(n)
        return cls(float(np.arccos(np.clip(n[2], -1, 1))), float(np.arctan2(n[1], n[0])))


def _normalise(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def zero_lambda_basis(f: FieldSample, bloch: BlochSpinorPair) -> np.ndarray:
    """Bispinors annihilated by the operator at a lambda = 0 point, scaled by N = sqrt(B^2 + E^2)."""
    b = np.asarray(f.b_vec, complex)
    e = np.asarray(f.e_vec, complex)
    norm = np.sqrt(np.real(b @ b.conj() + e @ e.conj()))
    if norm == 0:
        raise ZeroDivisionError("zero field: lambda = 0 basis normalisation undefined")
    sb, se = sigma_dot(b), -1j * sigma_dot(e)
    out = []
    for spinor in (bloch.alpha, bloch.beta):
        out.append(np.concatenate([sb @ spinor, se @ spinor]))
    for spinor in (bloch.alpha, bloch.beta):
        out.append(np.concatenate([se @ spinor, sb @ spinor]))
    return np.array(out) / norm


def zero_lambda_cross_overlap(f: FieldSample, bloch: BlochSpinorPair) -> complex:
    """Closed form of psi0_1^dagger psi0_3 = 2 n.(B x E) / N^2 (nonzero when the Poynting vector is)."""
    b, e = np.asarray(f.b_vec, float), np.asarray(f.e_vec, float)
    return 2.0 * bloch.n @ np.cross(b, e) / (b @ b + e @ e)


def _raw_eigen_basis(f: FieldSample, bloch: BlochSpinorPair):
    lam = eigenvalues(f)
    gm = f.b_vec - 1j * f.e_vec
    gp = f.b_vec + 1j * f.e_vec
    specs = [(lam[0], gm, bloch.alpha, 1), (lam[0], gm, bloch.beta, -1),
             (lam[2], gp, bloch.alpha, 1), (lam[2], gp, bloch.beta, -1)]
    vecs = []
    for j, (lm, g, spinor, sgn) in enumerate(specs):
        u = (lm * I2 + sgn * sigma_dot(g)) @ spinor
        vecs.append(np.concatenate([u, BLOCK_SIGN[j] * u]))
    return np.array(vecs), lam


def eigen_basis(f: FieldSample, bloch: BlochSpinorPair, amp: float = 1.0, return_bloch: bool = False):
    """Unit bispinors psi_j = (lambda +/- s.G) alpha|beta built on a Bloch pair.

    psi_1, psi_2 use G- with alpha and beta (eigenvalues +/-lambda_-), psi_3,
    psi_4 use G+.  If the Bloch vector makes one of them vanish the vector is
    rotated by pi/2 about whichever coordinate axis gives the best margin.
    """
    vecs, _ = _raw_eigen_basis(f, bloch)
    norms = np.linalg.norm(vecs, axis=-1)
    scale = np.sqrt(np.sum(f.b_vec ** 2) + np.sum(f.e_vec ** 2)) + amp
    if norms.min() < 1e-8 * scale:
        best = None
        for axis in range(3):
            n = _rotate(bloch.n, axis, np.pi / 2)
            trial = BlochSpinorPair.from_vector(n)
            tv, _ = _raw_eigen_basis(f, trial)
            margin = np.linalg.norm(tv, axis=-1).min()
            if best is None or margin > best[0]:
                best = (margin, trial, tv)
        if best[0] < 1e-8 * scale:
            raise BasisDegeneracyError("no Bloch orientation gives a non-degenerate basis")
        bloch, vecs = best[1], best[2]
        norms = np.linalg.norm(vecs, axis=-1)
    basis = vecs / norms[:, None]
    return (basis, bloch) if return_bloch else basis


def _rotate(n, axis, angle):
    c, s = np.cos(angle), np.sin(angle)
    i, k = [(1, 2), (2, 0), (0, 1)][axis]
    out = np.array(n, float)
    out[i], out[k] = c * n[i] - s * n[k], s * n[i] + c * n[k]
    return out


def eigen_normalisations(f: FieldSample, bloch: BlochSpinorPair) -> np.ndarray:
    """Closed-form N_j^2 of the unnormalised bispinors (energy density and Poynting content)."""
    b, e = np.asarray(f.b_vec, float), np.asarray(f.e_vec, float)
    lam = eigenvalues(f)
    lm, lp = lam[0], lam[2]
    n = bloch.n
    energy = b @ b + e @ e
    poynt = np.cross(e, b) @ n
    mix_m = 2.0 * n @ (b * lm.real - e * lm.imag)
    mix_p = 2.0 * n @ (b * lp.real + e * lp.imag)
    return 2.0 * np.array([
        abs(lm) ** 2 + mix_m + energy - 2.0 * poynt,
        abs(lm) ** 2 + mix_m + energy + 2.0 * poynt,
        abs(lp) ** 2 + mix_p + energy + 2.0 * poynt,
        abs(lp) ** 2 + mix_p + energy - 2.0 * poynt,
    ])


def eigen_overlaps(f: FieldSample, bloch: BlochSpinorPair):
    """Closed forms of psi_1^dagger psi_2 and psi_3^dagger psi_4 for unit bispinors."""
    b, e = np.asarray(f.b_vec, float), np.asarray(f.e_vec, float)
    lam = eigenvalues(f)
    lm, lp = lam[0], lam[2]
    nsq = eigen_normalisations(f, bloch)
    g = bloch.g
    exb = np.cross(e, b)
    o12 = 2.0 * g @ (2j * (b * lm.imag + e * lm.real) + 2.0 * exb) / np.sqrt(nsq[0] * nsq[1])
    o34 = 2.0 * g @ (2j * (b * lp.imag - e * lp.real) - 2.0 * exb) / np.sqrt(nsq[2] * nsq[3])
    return o12, o34


# ---------------------------------------------------------------------------
# Null-surface-compatible basis
# ---------------------------------------------------------------------------

def _g_pair(f: FieldSample, j: int):
    """(G, dG[i, mu]) for the G vector of basis index j (0-based)."""
    sgn = -1j if j < 2 else 1j
    return f.b_vec + sgn * f.e_vec, f.d_b + sgn * f.d_e


def _null_safe_parts(f: FieldSample, j: int, lam_pair=None):
    """Spinor ratio w_j = (mu_j - G_z) / G_m with its spacetime gradient.

    The upper block of psi_j is (1, w_j) / N_j with N_j = sqrt(2 (1 + |w_j|^2));
    this is (mu + s.G) alpha / mu for alpha proportional to (1, -G_z/G_m), so the
    1/lambda structure is divided out.  Batched over leading axes.
    """
    g, dg = _g_pair(f, j)
    lam = eigenvalues(f)[..., 0 if j < 2 else 2] if lam_pair is None else lam_pair
    mu = lam if j % 2 == 0 else -lam
    gz, dgz = g[..., 2], dg[..., 2, :]
    gm = g[..., 0] - 1j * g[..., 1]
    dgm = dg[..., 0, :] - 1j * dg[..., 1, :]
    safe = np.where(np.abs(lam) > 0, lam, 1.0)
    dlam = np.einsum("...i,...im->...m", g, dg) / safe[..., None]
    dmu = dlam if j % 2 == 0 else -dlam
    w = (mu - gz) / gm
    dw = (dmu - dgz) / gm[..., None] - ((mu - gz) / gm ** 2)[..., None] * dgm
    return w, dw, gm, mu


def null_safe_basis(f: FieldSample) -> np.ndarray:
    """Unit bispinors with upper block proportional to (1, (mu_j - G_z)/G_m)."""
    out = []
    for j in range(4):
        g, _ = _g_pair(f, j)
        scale = np.sqrt(np.sum(np.abs(g) ** 2, axis=-1))
        gm = g[..., 0] - 1j * g[..., 1]
        gp = g[..., 0] + 1j * g[..., 1]
        fallback = np.abs(gm) <= 1e-12 * scale
        with np.errstate(divide="ignore", invalid="ignore"):
            w, _, _, mu = _null_safe_parts(f, j)
        w = np.where(fallback, 0.0, w)
        # at G_m = 0 use the second row of the eigen-equation: u ~ (mu + G_z, G_p),
        # or (0, 1) when that vanishes too (field along z, mu = -G_z)
        alt1, alt2 = mu + g[..., 2], gp
        empty = np.abs(alt1) + np.abs(alt2) <= 1e-12 * scale
        alt1 = np.where(empty, 0.0, alt1)
        alt2 = np.where(empty, 1.0, alt2)
        first = np.where(fallback, alt1, 1.0 + 0j)
        second = np.where(fallback, alt2, w)
        u = np.stack([first, second], axis=-1)
        psi = np.concatenate([u, BLOCK_SIGN[j] * u], axis=-1)
        out.append(_normalise(psi))
    return np.stack(out, axis=-2)


def null_safe_bloch(f: FieldSample, pair: str = "minus") -> BlochSpinorPair:
    """Bloch angles of alpha proportional to (1, -G_z/G_m) for the G-/G+ pair."""
    g = f.b_vec - 1j * f.e_vec if pair == "minus" else f.b_vec + 1j * f.e_vec
    ratio = -g[2] / (g[0] - 1j * g[1])
    return BlochSpinorPair(float(2.0 * np.arctan(abs(ratio))), float(np.angle(ratio)))


def null_safe_bloch_te_closed(params, t: float, r, pair: str = "minus") -> float:
    """cos(theta_B) of the null-safe spinors for a pure TE Bessel mode, from the J ladder.

    With J = J_{m-1} e^{i Theta} + J_{m+1} e^{-i Theta} and G_z = J_m cos Theta,
    |G_m|^2 = (1 + k_z)^2 |J|^2 / (4 k_perp^2), which after k_perp^2 = (1 - k_z)(1 + k_z)
    gives the weighted form below.  The G+ pair follows from k_z -> -k_z.
    """
    from .specfun import bessel_j_orders
    x, y, z = r
    rho = np.hypot(x, y)
    phi = np.arctan2(y, x)
    m = params.m_z
    kz = params.kz if pair == "minus" else -params.kz
    theta = params.kz * z + m * phi - t + params.phase_te
    jm1, j0, jp1 = bessel_j_orders([m - 1, m, m + 1], params.kperp * rho)
    gz2 = (j0 * np.cos(theta)) ** 2
    jcal2 = abs(jm1 * np.exp(1j * theta) + jp1 * np.exp(-1j * theta)) ** 2
    num = (1 + kz) * jcal2 / 4 - (1 - kz) * gz2
    den = (1 + kz) * jcal2 / 4 + (1 - kz) * gz2
    return float(num / den)


def dual_projectors(basis: np.ndarray) -> np.ndarray:
    """Biorthogonal partners Xi_j with Xi_j^dagger psi_i = delta_ij."""
    out = np.empty_like(basis)
    for j in range(4):
        i = PARTNER[j]
        psi_j, psi_i = basis[..., j, :], basis[..., i, :]
        ov = np.einsum("...a,...a->...", psi_i.conj(), psi_j)
        if np.any(np.abs(ov) >= 1.0 - 1e-14):
            raise LinearDependenceError("partner bispinors are linearly dependent")
        v = psi_j - ov[..., None] * psi_i
        # |v|^2 = 1 - |ov|^2 without the cancellation
        out[..., j, :] = v / np.einsum("...a,...a->...", v.conj(), v).real[..., None]
    return out


def psi_derivative(f: FieldSample, j: int) -> np.ndarray:
    """Analytic d psi_j / d x^mu of the null-safe basis, shape [..., 4 (component), 4 (mu)]."""
    w, dw, _, _ = _null_safe_parts(f, j)
    nsq = 2.0 * (1.0 + np.abs(w) ** 2)
    norm = np.sqrt(nsq)
    dlog_n = (2.0 * np.real(np.conj(w)[..., None] * dw) / nsq[..., None])
    u = np.stack([np.ones_like(w), w], axis=-1)
    psi = np.concatenate([u, BLOCK_SIGN[j] * u], axis=-1) / norm[..., None]
    zero = np.zeros_like(dw)
    du = np.stack([zero, dw], axis=-2)
    dpsi = np.concatenate([du, BLOCK_SIGN[j] * du], axis=-2) / norm[..., None, None]
    return dpsi - psi[..., :, None] * dlog_n[..., None, :]


def derivative_projections(f: FieldSample, j: int):
    """Closed-form (Xi_j^dagger d psi_j, Xi_{i_j}^dagger d psi_j) for 1-based index ``j``.

    Xi_j^dagger d psi_j   = -d log N_j + (G_m / 2 mu_j) d w_j
    Xi_{i_j}^dagger d psi_j = -(N_{i_j} / N_j) (G_m / 2 mu_j) d w_j
    with w_j = (mu_j - G_z)/G_m; the second term diverges as lambda -> 0.
    """
    jj = j - 1
    ii = PARTNER[jj]
    w, dw, gm, mu = _null_safe_parts(f, jj)
    wi, _, _, _ = _null_safe_parts(f, ii)
    nj2 = 2.0 * (1.0 + np.abs(w) ** 2)
    ni2 = 2.0 * (1.0 + np.abs(wi) ** 2)
    dlog_n = np.real(np.conj(w)[..., None] * dw) * 2.0 / nj2[..., None]
    shift = (gm / (2.0 * mu))[..., None] * dw
    diag = -dlog_n + shift
    cross = -np.sqrt(ni2 / nj2)[..., None] * shift
    return diag, cross


def maxwell_source_term(f: FieldSample, which: str) -> np.ndarray:
    """[d_0 -/+ s.grad] s.G+/- as a 2x2 matrix; zero in source-free regions."""
    sgn = 1j if which == "plus" else -1j
    dg = f.d_b + sgn * f.d_e            # [i, mu]
    s_op = -1.0 if which == "plus" else 1.0
    dt_part = sigma_dot(dg[..., :, 0])
    # (s.grad)(s.G) = div G + i s.(curl G)
    div = dg[..., 0, 1] + dg[..., 1, 2] + dg[..., 2, 3]
    curl = np.stack([dg[..., 2, 2] - dg[..., 1, 3],
                     dg[..., 0, 3] - dg[..., 2, 1],
                     dg[..., 1, 1] - dg[..., 0, 2]], axis=-1)
    grad_part = div[..., None, None] * I2 + 1j * sigma_dot(curl)
    return dt_part + s_op * grad_part


def second_derivative_box(model: FieldModel, t: float, r, j: int, h: float = 1e-3) -> np.ndarray:
    """d^mu d_mu psi_j by central differences of the analytic first derivatives.

    Returns the 4-component bispinor; index ``j`` is 1-based.
    """
    r = np.asarray(r, float)
    pts_t = np.array([t + h, t - h] + [t] * 6)
    offs = np.zeros((8, 3))
    for k in range(3):
        offs[2 + 2 * k, k] = h
        offs[3 + 2 * k, k] = -h
    samples = model.sample(np.concatenate([[t], pts_t]), np.vstack([r, r + offs]))
    # follow the branch: the principal root may hand -lambda to a stencil neighbour
    lam = eigenvalues(samples)[:, j - 1]
    flip = (np.abs(lam - lam[0]) > np.abs(lam + lam[0]))[:, None, None]
    d = np.where(flip, psi_derivative(samples, PARTNER[j - 1]), psi_derivative(samples, j - 1))[1:]
    box = (d[0, :, 0] - d[1, :, 0]) / (2 * h)
    for k in range(3):
        box = box - (d[2 + 2 * k, :, k + 1] - d[3 + 2 * k, :, k + 1]) / (2 * h)
    return box


def assemble_dirac_bispinor(terms, f: FieldSample, chi: float, mass: float = 1.0) -> np.ndarray:
    """Apply [gamma^mu pi_mu + m c + i hbar gamma^mu d_mu] to each e^{-iS/hbar} d_j psi_j and sum.

    ``terms`` is a sequence of ``(phase, d, psi, dpsi, pi)`` with ``phase`` the
    complex S/hbar, ``d`` the amplitude (taken constant), ``psi`` a bispinor,
    ``dpsi`` its derivative ``[comp, mu]`` (or None for a constant bispinor) and
    ``pi`` the covariant kinetic momentum pi_mu in units of m c.  Derivatives
    are taken exactly, so the Maxwell-source part is whatever the field
    supplies; it vanishes for source-free analytic fields.
    """
    out = np.zeros(4, complex)
    for phase, d, psi, dpsi, pi in terms:
        pi = np.asarray(pi, complex)
        # gamma^mu pi_mu with the lower-index momentum
        slash = np.einsum("m,mab->ab", pi, GAMMAS)
        val = (slash + mass * np.eye(4)) @ (d * np.asarray(psi, complex))
        if dpsi is not None and chi != 0:
            val = val + 1j * chi * d * np.einsum("mab,bm->a", GAMMAS, np.asarray(dpsi, complex))
        out += np.exp(-1j * phase) * val
    return out

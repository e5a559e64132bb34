import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from semidirac.fields import BesselBeam, BesselBeamParams, FieldSample, PlaneWave, sample_bessel
from semidirac.invariants import eigenvalues
from semidirac.spinors import (GAMMA0, GAMMAS, METRIC, PARTNER, BlochSpinorPair, LinearDependenceError,
                               assemble_dirac_bispinor, derivative_projections, dual_projectors, eigen_basis,
                               eigen_normalisations, eigen_overlaps, maxwell_source_term, null_safe_basis,
                               null_safe_bloch, null_safe_bloch_te_closed, psi_derivative,
                               second_derivative_box, sigma_f_from_gammas, sigma_f_matrix, sigma_munu,
                               zero_lambda_basis, zero_lambda_cross_overlap)

comp = st.floats(-1.0, 1.0)
fields = st.builds(lambda e, b: FieldSample.uniform(e=e, b=b), st.tuples(comp, comp, comp), st.tuples(comp, comp, comp))
blochs = st.builds(BlochSpinorPair, st.floats(0.05, 3.09), st.floats(-3.1, 3.1))


def well_separated(f):
    lam = eigenvalues(f)
    return abs(lam[0]) > 0.05 and abs(lam[2]) > 0.05


def test_gamma_anticommutators():
    for mu in range(4):
        for nu in range(4):
            anti = GAMMAS[mu] @ GAMMAS[nu] + GAMMAS[nu] @ GAMMAS[mu]
            assert np.allclose(anti, 2 * METRIC[mu, nu] * np.eye(4), atol=0)


def test_sigma_munu_is_commutator():
    s = sigma_munu(0, 1)
    assert np.allclose(s, 0.5j * (GAMMAS[0] @ GAMMAS[1] - GAMMAS[1] @ GAMMAS[0]))
    assert np.allclose(sigma_munu(2, 2), 0)


def test_sigma_f_matrix_simple_cases():
    assert np.all(sigma_f_matrix(FieldSample.uniform()) == 0)
    m = sigma_f_matrix(FieldSample.uniform(b=(0, 0, 0.4)))
    assert np.allclose(m, np.diag([0.4, -0.4, 0.4, -0.4]))


@given(fields)
def test_sigma_f_matrix_from_gamma_contraction(f):
    assert np.allclose(sigma_f_from_gammas(f), sigma_f_matrix(f), atol=1e-15)


@given(fields, blochs)
def test_eigen_basis_residual_and_structure(f, bloch):
    assume(well_separated(f))
    basis = eigen_basis(f, bloch)
    lam = eigenvalues(f)
    m = sigma_f_matrix(f)
    for j in range(4):
        psi = basis[j]
        assert np.linalg.norm(m @ psi - lam[j] * psi) <= 1e-10
        assert np.vdot(psi, psi).real == pytest.approx(1.0, abs=1e-14)
        sign = 1 if j < 2 else -1
        assert np.allclose(psi[2:], sign * psi[:2], atol=1e-15)


@given(fields, blochs)
def test_eigen_basis_overlaps(f, bloch):
    assume(well_separated(f))
    basis, used = eigen_basis(f, bloch, return_bloch=True)
    for a, b in ((0, 2), (0, 3), (1, 2), (1, 3)):
        assert abs(np.vdot(basis[a], basis[b])) <= 1e-12
    o12, o34 = eigen_overlaps(f, used)
    assert abs(np.vdot(basis[0], basis[1]) - o12) <= 1e-10
    assert abs(np.vdot(basis[2], basis[3]) - o34) <= 1e-10


@given(fields, blochs)
def test_normalisation_closed_forms(f, bloch):
    assume(well_separated(f))
    from semidirac.spinors import _raw_eigen_basis
    raw, _ = _raw_eigen_basis(f, bloch)
    direct = np.sum(np.abs(raw) ** 2, axis=1)
    assert np.allclose(eigen_normalisations(f, bloch), direct, rtol=1e-12, atol=1e-14)


@given(fields, blochs)
def test_gamma0_pseudo_orthogonality(f, bloch):
    assume(well_separated(f))
    basis = eigen_basis(f, bloch)
    lam = eigenvalues(f)
    for j in range(4):
        for i in range(4):
            if abs(np.conj(lam[j]) - lam[i]) > 1e-6:
                prod = (np.conj(lam[j]) - lam[i]) * (basis[j].conj() @ GAMMA0 @ basis[i])
                assert abs(prod) <= 1e-10


def test_degenerate_bloch_vector_falls_back():
    f = FieldSample.uniform(b=(0, 0, 0.3))
    # the Bloch vector anti-aligned with B annihilates one bispinor
    basis, used = eigen_basis(f, BlochSpinorPair(np.pi, 0.0), return_bloch=True)
    assert used.theta_b != 0.0
    assert np.allclose(np.linalg.norm(basis, axis=1), 1.0)


def test_zero_lambda_basis_on_plane_wave():
    f = PlaneWave(0.3).sample(0.4, np.array([0.0, 0.0, 1.1]))
    bloch = BlochSpinorPair(0.7, 0.2)
    basis = zero_lambda_basis(f, bloch)
    m = sigma_f_matrix(f)
    for psi in basis:
        assert np.linalg.norm(m @ psi) <= 1e-12
        assert np.vdot(psi, psi).real == pytest.approx(1.0, abs=1e-12)
    assert abs(np.vdot(basis[0], basis[1])) <= 1e-12
    assert np.vdot(basis[0], basis[2]) == pytest.approx(zero_lambda_cross_overlap(f, bloch), abs=1e-12)
    with pytest.raises(ZeroDivisionError):
        zero_lambda_basis(FieldSample.uniform(), bloch)


@given(fields)
def test_null_safe_basis_residual(f):
    lam = eigenvalues(f)
    assume(abs(lam[0]) > 1e-6 and abs(lam[2]) > 1e-6)
    basis = null_safe_basis(f)
    m = sigma_f_matrix(f)
    for j in range(4):
        assert np.linalg.norm(m @ basis[j] - lam[j] * basis[j]) <= 1e-10 * max(1.0, abs(lam[j]))


@pytest.mark.parametrize("b", [(0, 0, 0.3), (0, 0, -0.3), (0.2, 0.1, 0.0)])
def test_null_safe_basis_fallback_points(b):
    f = FieldSample.uniform(b=b)
    basis = null_safe_basis(f)
    m = sigma_f_matrix(f)
    lam = eigenvalues(f)
    assert np.all(np.isfinite(basis))
    for j in range(4):
        assert np.linalg.norm(m @ basis[j] - lam[j] * basis[j]) <= 1e-12


def test_bloch_angles_match_te_closed_form(rng):
    params = BesselBeamParams(m_z=2, kperp=0.1)
    for _ in range(50):
        t, r = rng.uniform(0, 10), rng.uniform(-40, 40, 3)
        f = sample_bessel(params, t, r)
        for pair in ("minus", "plus"):
            ours = np.cos(null_safe_bloch(f, pair).theta_b)
            assert ours == pytest.approx(null_safe_bloch_te_closed(params, t, r, pair), abs=1e-12)


@given(fields)
def test_dual_projectors_biorthogonal_and_complete(f):
    assume(well_separated(f))
    basis = eigen_basis(f, BlochSpinorPair(1.0, 0.5))
    xi = dual_projectors(basis)
    assert np.allclose(xi.conj() @ basis.T, np.eye(4), atol=1e-12)
    completeness = sum(np.outer(basis[i], xi[i].conj()) for i in range(4))
    assert np.linalg.norm(completeness - np.eye(4)) <= 1e-10


def test_dual_projectors_of_orthonormal_basis_are_identity():
    basis = np.eye(4, dtype=complex)
    assert np.allclose(dual_projectors(basis), basis)
    dependent = np.array([[1, 0, 0, 0], [1, 0, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]], complex)
    with pytest.raises(LinearDependenceError):
        dual_projectors(dependent)


def test_derivative_projections_vanish_for_uniform_field():
    f = FieldSample.uniform(e=(0.05, 0.0, 0.0), b=(0.1, 0.2, 0.3))
    for j in range(1, 5):
        diag, cross = derivative_projections(f, j)
        assert np.all(diag == 0) and np.all(cross == 0)


def test_derivative_projections_against_finite_differences(rng):
    params = BesselBeamParams(m_z=1, amp_te=0.004, amp_tm=0.002, phase_tm=0.5)
    model = BesselBeam(params)
    h = 1e-5
    for _ in range(20):
        t, r = rng.uniform(0, 10), rng.uniform(-30, 30, 3)
        f = model.sample(t, r)
        if np.abs(eigenvalues(f)).min() < 0.1 * params.amp:
            continue
        basis = null_safe_basis(f)
        xi = dual_projectors(basis)
        for j in range(1, 5):
            fd = np.zeros((4, 4), complex)
            for mu in range(4):
                d = np.zeros(4)
                d[mu] = h
                plus = null_safe_basis(model.sample(t + d[0], r + d[1:]))[j - 1]
                minus = null_safe_basis(model.sample(t - d[0], r - d[1:]))[j - 1]
                fd[:, mu] = (plus - minus) / (2 * h)
            diag, cross = derivative_projections(f, j)
            i = PARTNER[j - 1]
            ref_diag, ref_cross = xi[j - 1].conj() @ fd, xi[i].conj() @ fd
            scale = max(np.abs(ref_diag).max(), np.abs(ref_cross).max())
            assert np.abs(diag - ref_diag).max() <= 1e-6 * scale
            assert np.abs(cross - ref_cross).max() <= 1e-6 * scale
            # the other pair never appears: Xi_3^dag d psi_1 = 0
            other = 2 if j <= 2 else 0
            assert np.abs(xi[other].conj() @ psi_derivative(f, j - 1)).max() <= 1e-12 * scale


def test_maxwell_source_term_vanishes_on_bessel_mode(rng):
    params = BesselBeamParams(m_z=2, amp_te=0.004, amp_tm=0.003)
    for _ in range(20):
        f = sample_bessel(params, rng.uniform(0, 10), rng.uniform(-30, 30, 3))
        for which in ("plus", "minus"):
            assert np.abs(maxwell_source_term(f, which)).max() <= 1e-14


def test_second_derivative_box_uniform_field_is_zero():
    class Uniform:
        def sample(self, t, r):
            n = np.shape(t)
            zero = np.zeros(n + (3, 3))
            return FieldSample(np.tile([0.05, 0.0, 0.0], n + (1,)), np.tile([0.1, 0.2, 0.3], n + (1,)),
                               zero, zero.copy(), np.zeros(n + (3,)), np.zeros(n + (3,)))
    box = second_derivative_box(Uniform(), 0.0, np.array([0.1, 0.2, 0.3]), 1)
    assert np.allclose(box, 0)


def test_free_particle_dirac_assembly():
    psi = np.array([1.0, 0.0, 1.0, 0.0], complex) / np.sqrt(2)
    p = np.array([1.25, -0.3, 0.4, 0.5])       # p_mu with lower index
    out = assemble_dirac_bispinor([(0.0, 1.0, psi, None, p)], FieldSample.uniform(), 0.02)
    expected = (np.einsum("m,mab->ab", p, GAMMAS) + np.eye(4)) @ psi
    assert np.allclose(out, expected)
    # the mass term breaks the equal-block structure of psi
    assert not np.allclose(out[2:], out[:2])

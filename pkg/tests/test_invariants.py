import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from semidirac.fields import BesselBeamParams, FieldSample, sample_bessel
from semidirac.invariants import (Convention, NullSurfaceWarning, PairCreationError, effective_mass, eigen_mode,
                                  eigenvalues, field_invariants, g_vectors, mass_from_ell, mass_gradient,
                                  mass_gradient_from, mass_gradient_small_field, spin_branch_ell,
                                  spin_branch_gradient, track_branch)
from semidirac.spinors import sigma_f_matrix

finite = st.floats(-1.0, 1.0, allow_nan=False)
vec3 = st.tuples(finite, finite, finite)


def test_invariants_of_simple_fields():
    f = FieldSample.uniform(b=(0, 0, 0.3))
    assert field_invariants(f) == (pytest.approx(0.09), 0.0)
    f = FieldSample.uniform(e=(0.2, 0, 0))
    assert np.allclose(eigenvalues(f), [0.2j, -0.2j, -0.2j, 0.2j]) or \
        np.allclose(np.sort_complex(eigenvalues(f)), np.sort_complex([0.2j, -0.2j, 0.2j, -0.2j]))


def test_eigenvalues_of_pure_b():
    lam = eigenvalues(FieldSample.uniform(b=(0, 0, 0.3)))
    assert np.allclose(lam, [0.3, -0.3, 0.3, -0.3])


def test_on_axis_m1_delta():
    p = BesselBeamParams(m_z=1)
    delta2, _ = field_invariants(sample_bessel(p, 0.0, np.zeros(3)))
    assert delta2 / p.amp ** 2 == pytest.approx(-0.25, abs=1e-12)


@given(vec3, vec3)
def test_g_vectors_conjugate(e, b):
    g = g_vectors(FieldSample.uniform(e=e, b=b))
    assert np.array_equal(g.g_plus, np.conj(g.g_minus))


@given(vec3, vec3)
def test_eigenvalues_match_dense_matrix(e, b):
    f = FieldSample.uniform(e=e, b=b)
    ours = eigenvalues(f)
    dense = np.linalg.eigvals(sigma_f_matrix(f))
    scale = max(np.abs(ours).max(), 1e-12)
    for lam in ours:
        assert np.min(np.abs(dense - lam)) <= 1e-10 * scale + 1e-14


@given(vec3, vec3)
def test_eigenvalue_pairing_and_degeneracy(e, b):
    lam = eigenvalues(FieldSample.uniform(e=e, b=b))
    assert lam[0] == -lam[1] and lam[2] == -lam[3]
    _, e_dot_b = field_invariants(FieldSample.uniform(e=e, b=b))
    if e_dot_b == 0:
        assert abs(lam[0]) == pytest.approx(abs(lam[2]))


def test_effective_mass_limits():
    ell, l, mt, dm = effective_mass(0.0, 0.02)
    assert (mt, dm) == (1.0, 0.0)
    chi, b0 = 0.02, 0.3
    ell, l, mt, dm = effective_mass(b0, chi)
    assert ell == pytest.approx(0.5 * chi * b0) and l == 0
    assert mt ** 2 == pytest.approx(1 + ell, rel=1e-15) and dm == 0
    ell, l, mt, dm = effective_mass(0.4j, chi)
    assert ell == 0 and l == pytest.approx(0.5 * chi * 0.4)
    assert mt ** 2 == pytest.approx((1 + np.sqrt(1 + l ** 2)) / 2, rel=1e-15)
    assert mt > 1


def test_pair_creation_regime_is_reported():
    with pytest.raises(PairCreationError):
        mass_from_ell(-2.0, 0.0)
    with pytest.raises(ValueError):
        effective_mass(0.1, -1.0)


@given(st.floats(-0.9, 5.0), st.floats(-5.0, 5.0))
def test_mass_split_identities(ell, l):
    _, _, mt, dm = mass_from_ell(ell, l)
    assert mt >= 0 and dm >= 0
    assert mt ** 2 - dm ** 2 == pytest.approx(1 + ell, abs=1e-12 * (1 + abs(ell) + abs(l)))
    assert 2 * mt * dm == pytest.approx(abs(l), abs=1e-12 * (1 + abs(ell) + abs(l)))


@given(st.floats(0.0, 0.1), st.floats(0.0, 0.05))
def test_delta_m_zero_for_real_lambda_and_even_for_imaginary(a, chi):
    assert effective_mass(a, chi)[3] == 0.0
    assert effective_mass(1j * a, chi)[3] == effective_mass(-1j * a, chi)[3]


def test_mass_gradient_trivial_cases(rng):
    assert np.all(mass_gradient(FieldSample.uniform(b=(0, 0, 0.2)), 0.02) == 0)
    f = sample_bessel(BesselBeamParams(), rng.uniform(0, 10, 5), rng.uniform(-50, 50, (5, 3)))
    assert np.all(mass_gradient(f, 0.0) == 0)
    g1, g2 = mass_gradient(f, 1e-6), mass_gradient(f, 1e-8)
    assert np.abs(g2).max() <= 1.01e-2 * np.abs(g1).max()   # linear in chi


def _fd_mass(params, t, r, chi, h=1e-3):
    """Five-point differences of effective_mass(eigenvalues) along each coordinate, branch-tracked."""
    lam0 = eigenvalues(sample_bessel(params, t, r))[0]
    out = np.zeros(4)
    for mu in range(4):
        d = np.zeros(4)
        d[mu] = h
        vals = []
        for s in (-2, -1, 1, 2):
            lam = track_branch(lam0, eigenvalues(sample_bessel(params, t + s * d[0], r + s * d[1:]))[0])
            vals.append(effective_mass(lam, chi)[2])
        out[mu] = (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * h)
    return out


def test_mass_gradient_matches_finite_differences_at_real_lambda(rng):
    """Strong-field points with real lambda, where m~ - 1 is not buried in rounding."""
    params = BesselBeamParams(amp_te=0.05)
    chi = 0.3
    checked = 0
    while checked < 20:
        t, r = rng.uniform(0, 20), rng.uniform(-40, 40, 3)
        f = sample_bessel(params, t, r)
        lam = eigenvalues(f)[0]
        if not (lam.real > 0.2 * params.amp and abs(lam.imag) < 1e-9 * params.amp):
            continue
        ana = mass_gradient(f, chi, 1, params.amp)
        fd = _fd_mass(params, t, r, chi)
        assert np.linalg.norm(ana - fd) <= 1e-6 * np.linalg.norm(fd)
        checked += 1


def test_mass_gradient_flags_null_surface():
    f = FieldSample.uniform()
    with pytest.warns(NullSurfaceWarning):
        g = mass_gradient(f, 0.02, 1, amp=1.0)
    assert np.all(g == 0)


def test_small_field_approximation_gap_shrinks_quadratically():
    params = BesselBeamParams()
    f = sample_bessel(params, 0.3, np.array([30.0, 5.0, 0.0]))
    gaps = []
    for chi in (0.02, 0.01, 0.005):
        from semidirac.invariants import lambda_gradient
        lam = eigenvalues(f)[0]
        d_mu = 0.5 * chi * lambda_gradient(f, lam)
        l = effective_mass(lam, chi)[1]
        gaps.append(np.linalg.norm(mass_gradient(f, chi) - mass_gradient_small_field(l, d_mu.real, d_mu.imag)))
    assert gaps[0] / gaps[1] >= 3.9 and gaps[1] / gaps[2] >= 3.9


@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-1, 1), st.floats(-1, 1))
def test_mass_gradient_from_is_chain_rule(ell, l, d_ell, d_l):
    h = 1e-6
    m = lambda a, b: mass_from_ell(a, b)[2]
    fd = (m(ell + h * d_ell, l + h * d_l) - m(ell - h * d_ell, l - h * d_l)) / (2 * h)
    ana = mass_gradient_from(ell, l, np.array([d_ell]), np.array([d_l]))[0]
    assert ana == pytest.approx(fd, abs=1e-8)


def test_spin_branch_conventions():
    chi, b0, e0 = 0.02, 0.3, 0.2
    f = FieldSample.uniform(b=(0, 0, b0))
    for conv in (Convention.FIG2, Convention.STRICT):
        ell, l = spin_branch_ell(f, 1, chi, conv)
        assert ell == pytest.approx(0.5 * chi * b0) and l == 0
    f = FieldSample.uniform(e=(e0, 0, 0))
    ell, l = spin_branch_ell(f, -1, chi, Convention.FIG2)
    assert ell == pytest.approx(-0.5 * chi * e0) and l == 0
    ell, l = spin_branch_ell(f, 1, chi, Convention.STRICT)
    assert ell == 0 and l == pytest.approx(0.5 * chi * e0)


def test_spin_branch_rejects_non_cross_free_fields():
    f = FieldSample.uniform(e=(0.1, 0, 0), b=(0.1, 0, 0))
    with pytest.raises(ValueError):
        spin_branch_ell(f, 1, 0.02)
    with pytest.raises(ValueError):
        spin_branch_gradient(f, 1, 0.02)


def test_spin_branch_gradient_matches_finite_differences(rng):
    params = BesselBeamParams()
    chi, h = 0.02, 1e-4
    for _ in range(10):
        t, r = rng.uniform(0, 10), rng.uniform(-30, 30, 3)
        f = sample_bessel(params, t, r)
        if abs(field_invariants(f)[0]) < 0.05 * params.amp ** 2:
            continue
        for conv in (Convention.FIG2, Convention.STRICT):
            d_ell, d_l, near = spin_branch_gradient(f, 1, chi, conv, params.amp)
            for mu in range(4):
                d = np.zeros(4)
                d[mu] = h
                plus = spin_branch_ell(sample_bessel(params, t + d[0], r + d[1:]), 1, chi, conv)
                minus = spin_branch_ell(sample_bessel(params, t - d[0], r - d[1:]), 1, chi, conv)
                assert d_ell[mu] == pytest.approx((plus[0] - minus[0]) / (2 * h), rel=1e-5, abs=1e-14)
                assert d_l[mu] == pytest.approx((plus[1] - minus[1]) / (2 * h), rel=1e-5, abs=1e-14)
            assert not near


def test_eigen_mode_bundle():
    f = FieldSample.uniform(b=(0, 0, 0.3))
    mode = eigen_mode(f, 0.02, 1, amp=0.3)
    assert mode.lam == pytest.approx(0.3) and mode.delta_m == 0
    assert mode.mass_ratio == pytest.approx(np.sqrt(1 + 0.003))
    assert not mode.near_null


def test_track_branch_picks_nearest_sign():
    assert track_branch(1 + 0.1j, -1.01 - 0.1j) == pytest.approx(1.01 + 0.1j)
    assert track_branch(1 + 0.1j, 1.01 + 0.1j) == pytest.approx(1.01 + 0.1j)

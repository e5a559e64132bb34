import numpy as np
import pytest
from hypothesis import given, strategies as st

from semidirac import dynamics as dyn
from semidirac.fields import BesselBeam, BesselBeamParams, FieldModel, FieldSample, VectorPotential, sample_bessel
from semidirac.invariants import eigenvalues
from semidirac.selfconsistent import (CorrectionTrack, UnsupportedModelError, assemble_pauli, correction_terms,
                                      corrections_along, effective_tensor, effective_tensor_numeric, iterate,
                                      regulator)

TE = BesselBeamParams(m_z=1, kperp=0.04, amp_te=0.005)


class Uniform(FieldModel):
    amp = 0.3

    def sample(self, t, r):
        n = np.shape(t)
        zero = np.zeros(n + (3, 3))
        return FieldSample(np.tile([0.05, 0.0, 0.0], n + (1,)), np.tile([0.1, 0.2, 0.3], n + (1,)),
                           zero, zero.copy(), np.zeros(n + (3,)), np.zeros(n + (3,)))

    def potential(self, t, r):
        return VectorPotential(np.zeros(np.shape(t)), np.zeros(np.shape(t) + (3,)))


def te_points(rng, n, min_lambda=0.05, real=False):
    out = []
    while len(out) < n:
        t, r = rng.uniform(0, 20), rng.uniform(-60, 60, 3)
        lam = eigenvalues(sample_bessel(TE, t, r))[0]
        if abs(lam.real if real else lam) > min_lambda * TE.amp:
            out.append((t, r))
    return out


@given(st.floats(0.0, 10.0))
def test_regulator_limits(x):
    amp = 0.005
    r = float(regulator(x * amp, amp))
    assert 0.0 <= r <= 1.0
    assert r == pytest.approx(np.tanh(x ** 4), abs=1e-15)
    assert regulator(0.0, amp) == 0.0


def test_regulator_is_quartic_near_zero():
    assert regulator(1e-3, 1.0) == pytest.approx(1e-12, rel=1e-9)
    assert regulator(3.0 + 4.0j, 1.0) == pytest.approx(1.0, abs=1e-12)


def test_uniform_field_has_no_corrections():
    cs = correction_terms(Uniform(), 0.0, [0.1, 0.2, 0.3], 1, 0.3 + 0.1j, 0.05)
    assert np.allclose(cs.p_vec, 0, atol=1e-12)
    assert abs(cs.q_scalar) <= 1e-9
    assert np.allclose(cs.f_eff, 0, atol=1e-12)
    assert abs(cs.mass_shift) <= 1e-12


def test_zero_chi_gives_exact_zero():
    model = BesselBeam(TE)
    cs = correction_terms(model, 1.0, [3.0, -2.0, 5.0], 1, 0.4, 0.0)
    for arr in (cs.p_vec, cs.f_eff, cs.w_vec, cs.zeta_shift):
        assert np.all(arr == 0)
    assert cs.q_scalar == 0 and cs.mass_shift == 0


def test_correction_tensor_antisymmetric(rng):
    model = BesselBeam(TE)
    for t, r in te_points(rng, 10):
        cs = correction_terms(model, t, r, 1, 0.7 - 0.2j, 0.0242631)
        assert np.allclose(cs.f_eff, -cs.f_eff.T, atol=0)
        assert np.all(np.isfinite(cs.p_vec)) and np.isfinite(cs.mass_shift)


def test_closed_form_tensor_matches_definition(rng):
    model = BesselBeam(TE)
    for t, r in te_points(rng, 15, min_lambda=0.2):
        f = model.sample(t, r)
        exact = effective_tensor(f, 1, regularize=False)
        numeric = effective_tensor_numeric(model, t, r, 1)
        assert np.allclose(exact, -exact.T)
        # where lambda is imaginary the tensor vanishes and only O(h^2) truncation is left
        assert np.abs(exact - numeric).max() <= 1e-5 * np.abs(exact).max() + 1e-7


def test_tensor_is_amplitude_invariant(rng):
    for t, r in te_points(rng, 10, real=True):
        f1 = sample_bessel(TE, t, r)
        f2 = sample_bessel(BesselBeamParams(m_z=1, kperp=0.04, amp_te=0.05), t, r)
        a = effective_tensor(f1, 1, amp=0.005)
        b = effective_tensor(f2, 1, amp=0.05)
        assert np.abs(a - b).max() <= 1e-10 * max(np.abs(a).max(), 1e-300)


def test_regularized_tensor_vanishes_on_null_surface():
    # walk along a generic ray to the first sign change of Delta^2, then bisect onto it
    t0, direction, offset = 0.3, np.array([np.cos(0.4), np.sin(0.4), 0.0]), np.array([0.0, 0.0, 1.7])
    point = lambda s: offset + s * direction
    d2 = lambda s: np.real(eigenvalues(sample_bessel(TE, t0, point(s)))[0] ** 2)
    grid = np.linspace(0.0, 60.0, 6001)
    signs = np.sign([d2(s) for s in grid])
    k = int(np.argmax(signs[1:] != signs[:-1]))
    lo, hi = grid[k], grid[k + 1]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if np.sign(d2(mid)) == np.sign(d2(lo)) else (lo, mid)
    tensor = lambda s: effective_tensor(sample_bessel(TE, t0, point(s)), 1, amp=TE.amp)
    near = tensor(0.5 * (lo + hi))
    assert np.all(np.isfinite(near))
    assert np.abs(near).max() <= 1e-6
    # and it shrinks continuously on the approach from the real-lambda side
    edge, out = (hi, 1.0) if d2(hi) > 0 else (lo, -1.0)
    away = [np.abs(tensor(edge + out * d)).max() for d in (1e-1, 1e-2, 1e-3)]
    assert away[0] > away[1] > away[2] > 0


def test_tensor_rejects_tm_and_bad_forms():
    f = sample_bessel(BesselBeamParams(m_z=1, amp_te=0.0, amp_tm=0.005), 0.3, np.array([4.0, 1.0, 0.0]))
    with pytest.raises(UnsupportedModelError):
        effective_tensor(f, 1, amp=0.005)
    g = sample_bessel(TE, 0.3, np.array([4.0, 1.0, 0.0]))
    with pytest.raises(ValueError):
        effective_tensor(g, 1, form="phase", amp=0.005)
    with pytest.raises(ValueError):
        effective_tensor(g, 1, form="other", amp=0.005)
    with pytest.raises(ValueError):
        effective_tensor(g, 1)


def test_correction_track_interpolation():
    t = np.array([0.0, 1.0, 2.0])
    track = CorrectionTrack.zeros(t)
    track.d_mass[:] = [0.0, 2.0, 4.0]
    track.__post_init__()
    assert track(0.5)[2] == pytest.approx(1.0)
    assert track(-1.0)[2] == 0.0 and track(9.0)[2] == 4.0
    assert CorrectionTrack.zeros(t).max_field == 0.0


def test_zero_corrections_reproduce_base_bitwise():
    cfg, init = dyn.vortex_trap_setup()
    report = iterate(cfg, init, 20.0, zero_corrections=True)
    assert report.deviations == [0.0]
    assert np.array_equal(report.trajectories[0].x, report.base.x)
    assert report.converged


def test_zero_chi_corrections_vanish_along_path():
    cfg, init = dyn.vortex_trap_setup()
    cfg0 = dyn.with_spin(cfg, chi=0.0)
    base = dyn.integrate(cfg0, init, 10.0)
    partner = dyn.integrate(dyn.with_spin(cfg0, sign=-1), init, 10.0)
    track = corrections_along(cfg0, base, partner, 1, np.linspace(0, 10, 11))
    assert track.max_field == 0.0
    assert np.all(track.d_mass == 0) and np.all(track.d_grad == 0) and np.all(track.d_zeta == 0)


def test_one_iteration_short_run_is_small():
    cfg, init = dyn.vortex_trap_setup()
    report = iterate(cfg, init, 100.0, max_iters=1)
    assert report.deviations[0] <= 1e-2
    assert report.corrections[0].max_field <= 1e-4


def test_pauli_assembly_requires_chi():
    cfg, init = dyn.vortex_trap_setup()
    cfg0 = dyn.with_spin(cfg, chi=0.0)
    traj = dyn.integrate(cfg0, init, 1.0)
    with pytest.raises(ZeroDivisionError):
        assemble_pauli(traj, traj)

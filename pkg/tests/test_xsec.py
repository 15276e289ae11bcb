import math

import numpy as np
import numpy.testing as npt
import pytest
import sympy

from acoustic_rte.errors import (CorrelatedSpectraUnsupported, FrozenSpectrumRequiresShellPath,
                                 MovingMedium, NotFrozen, QuadratureUnresolved)
from acoustic_rte.flow import AmbientState, doppler_frequencies
from acoustic_rte.spectra import (Combined, FlatSoundSpeed, GaussianProfile, GaussianSoundSpeed,
                                  IsotropicIncompressibleVelocity, NullSpectrum, VonKarmanProfile)
from acoustic_rte.xsec import (CUBE, BranchPair, QuadratureSpec, RateTable, gain_cross_section,
                               quiescent_sigma, scattered_rate, shell_rates, shell_sigma, sigma_branch,
                               sigma_d, sigma_t, t_vector, total_cross_section)


def quiet(c0=1.0):
    return AmbientState(c0, np.zeros(3), 1.0)


def unit(v):
    v = np.asarray(v, float)
    return v / np.linalg.norm(v)


def test_t_vector_example():
    s = AmbientState(1.0, np.array([1.0, 0.0, 0.0]), 1.0)
    x = np.array([1.0, 0.0, 0.0])
    npt.assert_allclose(t_vector(s, x, 0.0, x, 0.0), [0.5, 1.0, 0.0, 0.0])


def test_gaussian_same_branch_example():
    sp = GaussianSoundSpeed(0.01, 1.0, tau=1.0)
    k = np.array([0.0, 0.0, 1.0])
    p = unit([0.3, 0.0, 1.0])
    val = sigma_branch(quiet(), k, p, BranchPair(1, 1), sp)
    om = ups = -1.0
    expected = 0.25 * om * om * ups * ups * sp.rc(k - p, 0.0) / CUBE
    assert val == pytest.approx(expected, rel=1e-14)


def test_cross_branch_equal_magnitude_keeps_only_sound_term():
    snd = GaussianSoundSpeed(0.01, 1.0, tau=1.0)
    vel = IsotropicIncompressibleVelocity(GaussianProfile(0.02, 0.5), tau=1.0)
    both = Combined(snd, vel)
    k = np.array([0.0, 0.0, 1.0])
    p = unit([1.0, 0.5, -0.2])
    pair = BranchPair(-1, 1)
    assert sigma_branch(quiet(), k, p, pair, vel) == pytest.approx(0.0, abs=1e-300)
    assert sigma_branch(quiet(), k, p, pair, both) == sigma_branch(quiet(), k, p, pair, snd)


def test_total_scales_with_variance():
    a = IsotropicIncompressibleVelocity(GaussianProfile(0.01, 1.0), tau=1.0)
    b = IsotropicIncompressibleVelocity(GaussianProfile(0.02, 1.0), tau=1.0)
    k = np.array([0.0, 0.0, 2.0])
    assert total_cross_section(quiet(), k, 1, b) == pytest.approx(2 * total_cross_section(quiet(), k, 1, a),
                                                                  rel=1e-13)


def test_quiescent_forward_maximal():
    sp = GaussianSoundSpeed(0.01, 1.0)
    k = np.array([0.0, 0.0, 2.0])
    th = np.linspace(0, math.pi, 91)
    dirs = np.stack([np.sin(th), 0 * th, np.cos(th)], axis=1)
    vals = quiescent_sigma(quiet(), k, dirs, sp)
    assert np.argmax(vals) == 0
    assert np.all(np.diff(vals) <= 0)


def test_quiescent_value_against_symbolic_oracle():
    c, kk, R = sympy.symbols("c k R", positive=True)
    expr = sympy.pi * c ** 2 * kk ** 2 * R / (2 * (2 * sympy.pi) ** 3)
    oracle = float(expr.subs({c: 1, kk: 2, R: 1}))
    val = quiescent_sigma(quiet(), np.array([0.0, 0.0, 2.0]), np.array([1.0, 0.0, 0.0]), FlatSoundSpeed(1.0))
    assert val == pytest.approx(oracle, rel=1e-14)
    assert val == pytest.approx(0.0253303, abs=1e-6)


def test_divergence_free_identity():
    vel = IsotropicIncompressibleVelocity(GaussianProfile(0.02, 0.7), tau=1.0)
    rng = np.random.default_rng(4)
    k = rng.normal(size=(1000, 3))
    p = rng.normal(size=(1000, 3))
    q = k - p
    pp = vel.velocity_form(q, 0.3, p, p)
    pk = vel.velocity_form(q, 0.3, p, k)
    kk = vel.velocity_form(q, 0.3, k, k)
    scale = np.abs(pp) + 1e-300
    assert np.all(np.abs(pp - pk) <= 1e-12 * scale)
    assert np.all(np.abs(pp - kk) <= 1e-12 * scale)


def test_sigma_d_symmetric_on_shell():
    sp = Combined(GaussianSoundSpeed(0.01, 1.0, 1.0),
                  IsotropicIncompressibleVelocity(GaussianProfile(0.02, 0.7), 1.0))
    s = AmbientState(1.0, np.array([0.2, -0.1, 0.05]), 1.0)
    rng = np.random.default_rng(5)
    k = rng.normal(size=(200, 3))
    p = rng.normal(size=(200, 3))
    bk = rng.choice([0, 1], 200)
    bp = rng.choice([0, 1], 200)
    om = np.choose(bk, doppler_frequencies(s, k))
    ups = np.choose(bp, doppler_frequencies(s, p))
    a = sigma_d(s, k, om, p, ups, sp)
    b = sigma_d(s, p, ups, k, om, sp)
    npt.assert_allclose(a, b, rtol=1e-12)


def test_loss_gain_scattered_agree():
    sp = Combined(GaussianSoundSpeed(0.01, 1.0, 1.0),
                  IsotropicIncompressibleVelocity(GaussianProfile(0.02, 0.7), 1.0))
    s = AmbientState(1.0, np.array([0.2, 0.0, 0.1]), 1.0)
    k = np.array([0.3, 0.0, 1.5])
    q = QuadratureSpec(n_radial=96, n_polar=48, n_azimuth=8)
    loss = total_cross_section(s, k, 1, sp, q)
    assert gain_cross_section(s, k, 1, sp, q) == pytest.approx(loss, rel=1e-10)
    assert scattered_rate(s, k, 1, sp, q) == pytest.approx(loss, rel=1e-10)


def test_quadrature_converged():
    sp = IsotropicIncompressibleVelocity(VonKarmanProfile(0.01, 3.0, 0.3), tau=2.0)
    k = np.array([0.0, 0.0, 2.0])
    a = total_cross_section(quiet(), k, -1, sp, QuadratureSpec(n_radial=160, n_polar=64))
    b = total_cross_section(quiet(), k, -1, sp, QuadratureSpec(n_radial=320, n_polar=128))
    assert a == pytest.approx(b, rel=1e-6)


def test_shell_sigma_requirements():
    k = np.array([0.0, 0.0, 1.0])
    with pytest.raises(NotFrozen):
        shell_sigma(quiet(), k, k, BranchPair(1, 1), GaussianSoundSpeed(0.01, 1.0, 1.0))
    moving = AmbientState(1.0, np.array([0.1, 0.0, 0.0]), 1.0)
    with pytest.raises(MovingMedium):
        shell_sigma(moving, k, k, BranchPair(1, 1), GaussianSoundSpeed(0.01, 1.0))
    with pytest.raises(FrozenSpectrumRequiresShellPath):
        sigma_d(quiet(), k, -1.0, k, -1.0, GaussianSoundSpeed(0.01, 1.0))
    assert shell_sigma(quiet(), k, k, BranchPair(1, -1), GaussianSoundSpeed(0.01, 1.0)) == 0.0


def test_quadrature_unresolved():
    sp = GaussianSoundSpeed(0.01, 1.0, 1.0)
    with pytest.raises(QuadratureUnresolved):
        total_cross_section(quiet(), np.array([0.0, 0.0, 1.0]), 1, sp, QuadratureSpec(n_radial=16))
    with pytest.raises(QuadratureUnresolved):
        total_cross_section(quiet(), np.array([0.0, 0.0, 1.0]), 1, _FlatUnfrozen())


class _FlatUnfrozen(FlatSoundSpeed):
    frozen = False

    def __init__(self):
        super().__init__(1.0)


def test_correlated_rejected():
    class Corr(GaussianSoundSpeed):
        correlated = True
    with pytest.raises(CorrelatedSpectraUnsupported):
        sigma_branch(quiet(), np.ones(3), np.ones(3), BranchPair(1, 1), Corr(0.01, 1.0, 1.0))


def test_null_spectrum_zero():
    assert total_cross_section(quiet(), np.ones(3), 1, NullSpectrum()) == 0.0


def test_frozen_shell_totals():
    sp = FlatSoundSpeed(1.0)
    k = np.array([0.0, 0.0, 2.0])
    # flat spectrum: sigma is angle independent, total = 4 pi |k|^2 / c sigma
    expected = 4 * math.pi * 4.0 * quiescent_sigma(quiet(), k, k, sp)
    assert total_cross_section(quiet(), k, 1, sp) == pytest.approx(expected, rel=1e-12)
    loss, scat = shell_rates(np.array([1.0, 1.0]), np.array([k, 2 * k]), sp, QuadratureSpec())
    assert loss[0] == pytest.approx(expected, rel=1e-12)
    npt.assert_allclose(loss, scat, rtol=1e-12)


def test_sigma_t_vs_sigma_d_transpose():
    sp = IsotropicIncompressibleVelocity(GaussianProfile(0.02, 0.7), 1.0)
    s = AmbientState(1.0, np.array([0.2, 0.1, 0.0]), 1.0)
    k = np.array([0.1, 0.2, 1.0])
    p = np.array([-0.3, 0.4, 0.9])
    om = doppler_frequencies(s, k)[0]
    ups = doppler_frequencies(s, p)[1]
    # divergence-free: the transposed kernel agrees with the direct one
    assert sigma_t(s, k, om, p, ups, sp) == pytest.approx(sigma_d(s, k, om, p, ups, sp), rel=1e-12)


def test_rate_table_interpolates_and_pickles():
    import pickle

    sp = IsotropicIncompressibleVelocity(GaussianProfile(0.01, 1.0))
    tab = RateTable(sp, (0.5, 3.0), (0.9, 1.1))
    for kn in (0.7, 1.3, 2.9):
        direct = total_cross_section(quiet(1.05), np.array([0.0, 0.0, kn]), 1, sp)
        assert float(tab.loss_rate(1.05, kn)) == pytest.approx(direct, rel=1e-4)
    again = pickle.loads(pickle.dumps(tab))
    assert float(again.loss_rate(1.0, 1.0)) == float(tab.loss_rate(1.0, 1.0))
    assert tab.conservative

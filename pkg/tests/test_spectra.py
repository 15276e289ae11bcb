import math

import numpy as np
import numpy.testing as npt
import pytest
from scipy import integrate

from acoustic_rte.errors import TabulationOutOfRange
from acoustic_rte.spectra import (TABLE_COLUMNS, Combined, FlatSoundSpeed, GaussianProfile,
                                  GaussianSoundSpeed, IsotropicIncompressibleVelocity, NullSpectrum,
                                  SpectralArgument, TabulatedSpectrum, VonKarmanProfile,
                                  assemble_correlation_tensor, gaussian_psd, temporal_line)


def models():
    return [
        GaussianSoundSpeed(0.01, 1.3),
        GaussianSoundSpeed(0.02, 0.7, tau=2.0),
        FlatSoundSpeed(0.5),
        IsotropicIncompressibleVelocity(GaussianProfile(0.01, 1.0)),
        IsotropicIncompressibleVelocity(GaussianProfile(0.01, 1.0), tau=0.5),
        IsotropicIncompressibleVelocity(VonKarmanProfile(0.01, 5.0, 0.1)),
        Combined(GaussianSoundSpeed(0.01, 1.0, 1.0),
                 IsotropicIncompressibleVelocity(GaussianProfile(0.02, 2.0), 1.0)),
    ]


def random_eta(rng, n=1000, scale=2.0):
    return rng.normal(size=(n, 3)) * scale, rng.normal(size=n) * scale


@pytest.mark.parametrize("model", models(), ids=lambda m: type(m).__name__)
def test_evenness_exact(model):
    p, u = random_eta(np.random.default_rng(0))
    a = assemble_correlation_tensor(model, SpectralArgument(p, u))
    b = assemble_correlation_tensor(model, SpectralArgument(-p, -u))
    npt.assert_array_equal(a, b)


@pytest.mark.parametrize("model", models(), ids=lambda m: type(m).__name__)
def test_psd_nonnegative(model):
    p, u = random_eta(np.random.default_rng(1))
    a = assemble_correlation_tensor(model, SpectralArgument(p, u))
    scale = np.max(np.abs(a))
    assert np.min(np.linalg.eigvalsh(a)) >= -1e-12 * scale


@pytest.mark.parametrize("model", [m for m in models() if m.has_velocity], ids=lambda m: type(m).__name__)
def test_incompressible(model):
    p, u = random_eta(np.random.default_rng(2))
    rv = model.rv(p, u)
    form = np.einsum("ni,nij,nj->n", p, rv, p)
    scale = np.einsum("ni,ni->n", p, p) * np.abs(rv).max(axis=(1, 2))
    assert np.all(np.abs(form) <= 1e-14 * scale)


def test_gaussian_psd_zero_against_quadrature_oracle():
    var, ell = 0.3, 1.7
    # (2 pi)^-3 \int var exp(-|y|^2 / 2 l^2) dy in spherical coordinates
    radial = integrate.quad(lambda r: 4 * math.pi * r * r * var * math.exp(-r * r / (2 * ell * ell)),
                            0, 40 * ell, epsabs=0, epsrel=1e-13)[0]
    oracle = radial / (2 * math.pi) ** 3
    assert gaussian_psd(var, ell, p=np.zeros(3)) == pytest.approx(oracle, rel=1e-6)


def test_inverse_transform_recovers_variance():
    var, ell, tau = 0.04, 0.8, 1.5
    m = GaussianSoundSpeed(var, ell, tau)

    def radial(q):
        return 4 * math.pi * q * q * m.rc(np.array([0.0, 0.0, q]), 0.0) / temporal_line(0.0, tau)

    spatial = integrate.quad(radial, 0, 20 / ell, epsabs=0, epsrel=1e-12)[0]
    temporal = integrate.quad(lambda u: temporal_line(u, tau), -40 / tau, 40 / tau)[0]
    assert spatial * temporal == pytest.approx(var, rel=1e-4)


def test_velocity_component_variance():
    var, ell = 0.02, 1.4
    m = IsotropicIncompressibleVelocity(GaussianProfile(var, ell))

    def radial(q):
        return 4 * math.pi * q * q * np.trace(m.rv(np.array([0.0, q, 0.0]), 0.0))

    total = integrate.quad(radial, 0, 20 / ell, epsabs=0, epsrel=1e-12)[0]
    assert total / 3.0 == pytest.approx(var, rel=1e-6)


def test_von_karman_normalisation():
    var = 0.03
    prof = VonKarmanProfile(var, 4.0, 0.05)
    e = lambda q: 4 * math.pi * q * q * prof(q)  # noqa: E731
    total = sum(integrate.quad(e, a, b, limit=400)[0] for a, b in [(0, 0.25), (0.25, 20), (20, 240)])
    assert total == pytest.approx(1.5 * var, rel=1e-6)
    q = np.linspace(0, 100, 5000)
    assert np.all(prof.bound(q) >= prof(q))


def test_velocity_zero_p_projector():
    m = IsotropicIncompressibleVelocity(GaussianProfile(0.01, 1.0))
    npt.assert_allclose(m.rv(np.zeros(3)), (2.0 / 3.0) * m.radial(0.0) * np.eye(3))


def test_null_spectrum():
    s = NullSpectrum()
    assert s.null and s.frozen
    npt.assert_array_equal(assemble_correlation_tensor(s, SpectralArgument(np.ones((4, 3)))), 0.0)


def test_combined_requires_matching_time_dependence():
    with pytest.raises(ValueError):
        Combined(GaussianSoundSpeed(0.01, 1.0), IsotropicIncompressibleVelocity(GaussianProfile(0.01, 1.0), 1.0))


def test_frozen_sup_bounds():
    for m in models():
        q = np.linspace(0, 6, 50)
        p = np.stack([q, 0 * q, 0 * q], axis=1)
        if m.has_sound:
            for u in (0.0, 0.3):
                assert np.all(m.rc(p, u) <= m.sup_c(q) * (1 + 1e-12))
        if m.has_velocity:
            eig = np.linalg.eigvalsh(m.rv(p, 0.0)).max(axis=1)
            assert np.all(eig <= m.sup_v(q) * (1 + 1e-12))


def write_table(path, model, n=9, upsilon=(0.0,)):
    ax = np.linspace(-2.0, 2.0, n)
    rows = []
    for a in ax:
        for b in ax:
            for c in ax:
                for u in upsilon:
                    t = assemble_correlation_tensor(model, SpectralArgument(np.array([a, b, c]), u))
                    rows.append([a, b, c, u] + [t[i, j] for i, j in
                                                [(0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3),
                                                 (2, 2), (2, 3), (3, 3)]])
    with open(path, "w") as fh:
        fh.write(",".join(TABLE_COLUMNS) + "\n")
        for r in rows:
            fh.write(",".join(repr(float(v)) for v in r) + "\n")


def test_tabulated_roundtrip_and_interpolation(tmp_path):
    m = Combined(GaussianSoundSpeed(0.01, 1.0), IsotropicIncompressibleVelocity(GaussianProfile(0.02, 1.0)))
    path = tmp_path / "table.csv"
    write_table(path, m, n=17)
    tab = TabulatedSpectrum.from_csv(path)
    assert tab.frozen
    node = np.array([[0.5, -0.25, 1.0]])
    npt.assert_allclose(tab.tensor(node)[0], assemble_correlation_tensor(m, SpectralArgument(node))[0],
                        rtol=1e-12, atol=1e-15)
    off = np.array([[0.3, 0.1, -0.6]])
    npt.assert_allclose(tab.rc(off), m.rc(off), rtol=0.05)
    with pytest.raises(TabulationOutOfRange):
        tab.rc(np.array([[3.0, 0.0, 0.0]]))


def test_tabulated_even_and_psd(tmp_path):
    m = IsotropicIncompressibleVelocity(GaussianProfile(0.02, 1.0), tau=1.0)
    path = tmp_path / "table.csv"
    write_table(path, m, n=9, upsilon=(-2.0, 0.0, 2.0))
    tab = TabulatedSpectrum.from_csv(path)
    assert not tab.frozen
    rng = np.random.default_rng(3)
    p = rng.uniform(-1.9, 1.9, (200, 3))
    u = rng.uniform(-1.9, 1.9, 200)
    a = assemble_correlation_tensor(tab, SpectralArgument(p, u))
    npt.assert_array_equal(a, assemble_correlation_tensor(tab, SpectralArgument(-p, -u)))
    assert np.min(np.linalg.eigvalsh(a)) >= -1e-12 * np.abs(a).max()


def test_tabulated_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        TabulatedSpectrum.from_csv(path)

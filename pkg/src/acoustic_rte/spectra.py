"""Cross-power spectral densities of the random sound-speed and velocity perturbations.

Transform convention
--------------------
``R_hat(eta) = (2 pi)^-4 \\int exp(+i tau.eta) R(tau) d tau`` with
``eta = (p, upsilon)``, so the correlation at zero lag is ``\\int R_hat d eta``.
The Gaussian models are normalised so that this inverse transform returns the
stated variance exactly.

Frozen (time-independent) perturbations carry a ``2 pi delta(upsilon)`` line
that is never discretised: frozen models only expose the spatial density
``R_hat^spatial(p)`` and the cross-section code collapses the frequency
argument onto the elastic shell.

All models are even in ``eta`` and return arrays broadcast over ``p[..., :3]``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.interpolate import RegularGridInterpolator

from .errors import TabulationOutOfRange

__all__ = [
    "SpectralArgument", "SpectrumModel", "NullSpectrum", "GaussianSoundSpeed",
    "FlatSoundSpeed", "GaussianProfile", "VonKarmanProfile",
    "IsotropicIncompressibleVelocity", "Combined", "TabulatedSpectrum",
    "gaussian_psd", "temporal_line", "isotropic_incompressible_velocity_psd",
    "assemble_correlation_tensor",
]

TWO_PI = 2.0 * math.pi


def _norm(p):
    return np.sqrt(np.einsum("...i,...i->...", p, p))


@dataclass(frozen=True)
class SpectralArgument:
    p: np.ndarray
    upsilon: np.ndarray = 0.0

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        object.__setattr__(self, "upsilon", np.asarray(self.upsilon, dtype=float))


def temporal_line(upsilon, tau):
    """Gaussian temporal line shape of unit integral, even in ``upsilon``."""
    upsilon = np.asarray(upsilon, dtype=float)
    return tau / math.sqrt(TWO_PI) * np.exp(-0.5 * (tau * upsilon) ** 2)


def gaussian_psd(variance, length, upsilon=None, tau=None, *, p):
    """Gaussian spectral density of a field with ``R(y) = variance exp(-|y|^2 / 2 l^2)``.

    Without ``tau`` (frozen) the spatial density is returned; otherwise it is
    multiplied by the unit-integral temporal line of correlation time ``tau``.
    """
    q2 = np.einsum("...i,...i->...", np.asarray(p, float), np.asarray(p, float))
    value = variance * (length * length / TWO_PI) ** 1.5 * np.exp(-0.5 * length * length * q2)
    if tau is not None:
        value = value * temporal_line(upsilon, tau)
    return value


def isotropic_incompressible_velocity_psd(profile, p, upsilon=0.0):
    """``E(|p|, upsilon) (I - p_hat p_hat)`` as a ``(..., 3, 3)`` array.

    ``profile`` is a callable ``(|p|, upsilon) -> E``.  At ``p = 0`` the
    projector is replaced by its angular average ``2/3 I``.
    """
    p = np.asarray(p, dtype=float)
    q = _norm(p)
    e = np.asarray(profile(q, upsilon), dtype=float)
    safe = np.where(q > 0.0, q, 1.0)
    ph = p / safe[..., None]
    proj = np.eye(3) - ph[..., :, None] * ph[..., None, :]
    proj = np.where((q > 0.0)[..., None, None], proj, (2.0 / 3.0) * np.eye(3))
    return e[..., None, None] * proj


class SpectrumModel:
    """Interface shared by every spectral model.

    Subclasses implement ``rc`` and, when they carry velocity perturbations,
    ``velocity_form`` (the bilinear form ``a . R_v . b``).
    """

    frozen = False
    isotropic = True
    divergence_free = True
    correlated = False
    has_sound = False
    has_velocity = False
    scale = 1.0

    def rc(self, p, upsilon=0.0):
        return np.zeros(np.shape(p)[:-1])

    def rv(self, p, upsilon=0.0):
        return np.zeros(np.shape(p)[:-1] + (3, 3))

    def rcv(self, p, upsilon=0.0):
        return np.zeros(np.shape(p)[:-1] + (3,))

    def velocity_form(self, p, upsilon, a, b):
        """``a . R_v(p, upsilon) . b`` broadcast over leading axes."""
        return np.einsum("...i,...ij,...j->...", a, self.rv(p, upsilon), b)

    def sup_c(self, q):
        """Upper bound of ``R_c`` over frequency at wavenumber ``|p| = q``."""
        return np.zeros(np.shape(q))

    def sup_v(self, q):
        """Upper bound of the largest eigenvalue of ``R_v`` over frequency."""
        return np.zeros(np.shape(q))

    @property
    def null(self) -> bool:
        return not (self.has_sound or self.has_velocity)

    def support_radius(self) -> float:
        """Wavenumber beyond which the density is treated as zero."""
        return 0.0

    def resolution_length(self) -> float:
        """Smallest correlation length the quadrature must resolve."""
        return 1.0

    def peak_scale(self) -> float:
        """Wavenumber scale of the spectral peak (for grading quadratures)."""
        return 1.0 / self.resolution_length()


class NullSpectrum(SpectrumModel):
    def __init__(self, frozen=True):
        self.frozen = frozen

    def support_radius(self):
        return 0.0


class GaussianSoundSpeed(SpectrumModel):
    """Gaussian sound-speed perturbations; ``tau=None`` means frozen."""

    has_sound = True

    def __init__(self, variance, length, tau=None):
        if length <= 0.0 or variance < 0.0:
            raise ValueError("GaussianSoundSpeed needs length > 0 and variance >= 0")
        if tau is not None and tau <= 0.0:
            raise ValueError("correlation time must be positive")
        self.variance = float(variance)
        self.length = float(length)
        self.tau = None if tau is None else float(tau)
        self.frozen = tau is None

    def rc(self, p, upsilon=0.0):
        return gaussian_psd(self.variance, self.length, upsilon, self.tau, p=p)

    def sup_c(self, q):
        q = np.asarray(q, float)
        peak = 1.0 if self.tau is None else self.tau / math.sqrt(TWO_PI)
        return (self.variance * (self.length ** 2 / TWO_PI) ** 1.5
                * np.exp(-0.5 * (self.length * q) ** 2) * peak)

    def support_radius(self):
        return 8.0 / self.length

    def resolution_length(self):
        return self.length

    def __repr__(self):
        return f"GaussianSoundSpeed(variance={self.variance}, length={self.length}, tau={self.tau})"


class FlatSoundSpeed(SpectrumModel):
    """Frozen white (delta-correlated) sound-speed perturbations, ``R_c = level``."""

    has_sound = True
    frozen = True

    def __init__(self, level):
        if level < 0.0:
            raise ValueError("level must be non-negative")
        self.level = float(level)

    def rc(self, p, upsilon=0.0):
        return np.full(np.shape(p)[:-1], self.level)

    def sup_c(self, q):
        return np.full(np.shape(q), self.level)

    def support_radius(self):
        return math.inf

    def resolution_length(self):
        return math.inf

    def __repr__(self):
        return f"FlatSoundSpeed(level={self.level})"


class GaussianProfile:
    """Radial profile ``F(q)`` of a Gaussian velocity field with component variance ``variance``."""

    def __init__(self, variance, length):
        self.variance = float(variance)
        self.length = float(length)

    def __call__(self, q):
        return (1.5 * self.variance * (self.length ** 2 / TWO_PI) ** 1.5
                * np.exp(-0.5 * (self.length * np.asarray(q, float)) ** 2))

    def bound(self, q):
        return self(q)

    def support_radius(self):
        return 8.0 / self.length

    def resolution_length(self):
        return self.length

    def peak_scale(self):
        return 1.0 / self.length


class VonKarmanProfile:
    """von Karman energy spectrum with a Gaussian inner-scale cut-off.

    ``E(q) ~ (qL)^4 / (1 + (qL)^2)^(17/6) exp(-(q l)^2)`` normalised so that
    ``\\int E dq = 3/2 variance``; the radial profile is ``E / (4 pi q^2)``.
    """

    def __init__(self, variance, outer, inner):
        if not outer > inner > 0.0:
            raise ValueError("von Karman profile needs outer > inner > 0")
        self.variance = float(variance)
        self.outer = float(outer)
        self.inner = float(inner)
        shape = lambda q: (q * outer) ** 4 / (1.0 + (q * outer) ** 2) ** (17.0 / 6.0) * math.exp(-(q * inner) ** 2)  # noqa: E731
        qc = 1.0 / outer
        total = (integrate.quad(shape, 0.0, qc, limit=200)[0]
                 + integrate.quad(shape, qc, 1.0 / inner, limit=400)[0]
                 + integrate.quad(shape, 1.0 / inner, 12.0 / inner, limit=200)[0])
        self._norm = 1.5 * self.variance / total
        self._grid = np.linspace(0.0, 12.0 / inner, 20001)
        vals = self(self._grid)
        # right-running max is non-increasing and dominates the profile on each cell
        self._bound = 1.001 * np.maximum.accumulate(vals[::-1])[::-1]

    def __call__(self, q):
        q = np.asarray(q, float)
        qL2 = (q * self.outer) ** 2
        return (self._norm / (4.0 * math.pi) * self.outer ** 2 * qL2
                / (1.0 + qL2) ** (17.0 / 6.0) * np.exp(-(q * self.inner) ** 2))

    def bound(self, q):
        q = np.asarray(q, float)
        idx = np.clip(np.searchsorted(self._grid, q, side="right") - 1, 0, len(self._grid) - 1)
        return self._bound[idx]

    def support_radius(self):
        return 6.0 / self.inner

    def resolution_length(self):
        return self.inner

    def peak_scale(self):
        return 1.0 / self.outer


class IsotropicIncompressibleVelocity(SpectrumModel):
    """``R_v = F(|p|) g(upsilon) (I - p_hat p_hat)`` with optional temporal line ``g``."""

    has_velocity = True

    def __init__(self, profile, tau=None, scale=1.0):
        if tau is not None and tau <= 0.0:
            raise ValueError("correlation time must be positive")
        self.profile = profile
        self.tau = None if tau is None else float(tau)
        self.frozen = tau is None
        self.scale = float(scale)

    def radial(self, q, upsilon=0.0):
        value = self.scale * self.profile(q)
        if self.tau is not None:
            value = value * temporal_line(upsilon, self.tau)
        return value

    def rv(self, p, upsilon=0.0):
        return isotropic_incompressible_velocity_psd(self.radial, p, upsilon)

    def velocity_form(self, p, upsilon, a, b):
        p = np.asarray(p, float)
        q2 = np.einsum("...i,...i->...", p, p)
        q = np.sqrt(q2)
        f = self.radial(q, upsilon)
        ab = np.einsum("...i,...i->...", a, b)
        pa = np.einsum("...i,...i->...", p, a)
        pb = np.einsum("...i,...i->...", p, b)
        proj = np.where(q2 > 0.0, ab - pa * pb / np.where(q2 > 0.0, q2, 1.0), (2.0 / 3.0) * ab)
        return f * proj

    def sup_v(self, q):
        peak = 1.0 if self.tau is None else self.tau / math.sqrt(TWO_PI)
        return self.scale * self.profile.bound(q) * peak

    def support_radius(self):
        return self.profile.support_radius()

    def resolution_length(self):
        return self.profile.resolution_length()

    def peak_scale(self):
        return self.profile.peak_scale()


class Combined(SpectrumModel):
    """Uncorrelated sound-speed and velocity perturbations (``R_cv = 0``)."""

    has_sound = True
    has_velocity = True

    def __init__(self, sound: SpectrumModel, velocity: IsotropicIncompressibleVelocity):
        if sound.frozen != velocity.frozen:
            raise ValueError("Combined spectra must be both frozen or both time-dependent")
        self.sound = sound
        self.velocity = velocity
        self.frozen = sound.frozen

    def rc(self, p, upsilon=0.0):
        return self.sound.rc(p, upsilon)

    def rv(self, p, upsilon=0.0):
        return self.velocity.rv(p, upsilon)

    def velocity_form(self, p, upsilon, a, b):
        return self.velocity.velocity_form(p, upsilon, a, b)

    def sup_c(self, q):
        return self.sound.sup_c(q)

    def sup_v(self, q):
        return self.velocity.sup_v(q)

    def support_radius(self):
        return max(self.sound.support_radius(), self.velocity.support_radius())

    def resolution_length(self):
        return min(self.sound.resolution_length(), self.velocity.resolution_length())

    def peak_scale(self):
        return min(self.sound.peak_scale(), self.velocity.peak_scale())


# upper-triangle order of the 10 independent entries of the symmetric 4x4 tensor
_TRI = [(0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)]
TABLE_COLUMNS = ["p1", "p2", "p3", "upsilon", "rc", "rcv1", "rcv2", "rcv3",
                 "rv11", "rv12", "rv13", "rv22", "rv23", "rv33"]


class TabulatedSpectrum(SpectrumModel):
    """Spectral tensor sampled on a regular ``(p1, p2, p3, upsilon)`` grid.

    Interpolation is multilinear; evenness is enforced by averaging the values
    at ``eta`` and ``-eta``, so the grids must be symmetric about zero.  A
    single ``upsilon`` value marks a frozen (spatial-only) table.
    """

    isotropic = False
    has_sound = True
    has_velocity = True

    def __init__(self, axes, values, scale=1.0):
        p1, p2, p3, ups = [np.asarray(a, dtype=float) for a in axes]
        values = np.asarray(values, dtype=float)
        for ax in (p1, p2, p3):
            if not np.allclose(ax, -ax[::-1]):
                raise ValueError("tabulated wavevector axes must be symmetric about zero")
        self.frozen = ups.size == 1
        self.scale = float(scale)
        self.axes = (p1, p2, p3, ups)
        self.values = values
        grid_axes = (p1, p2, p3) if self.frozen else (p1, p2, p3, ups)
        data = values[..., 0, :] if self.frozen else values
        self._interp = RegularGridInterpolator(grid_axes, data, method="linear",
                                               bounds_error=False, fill_value=np.nan)
        self._max = np.max(np.abs(values), axis=tuple(range(values.ndim - 1))) * self.scale
        self.correlated = bool(np.any(values[..., 1:4] != 0.0))
        self.divergence_free = False
        self._pmax = float(min(p1.max(), p2.max(), p3.max()))

    @classmethod
    def from_csv(cls, path, scale=1.0):
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader)]
            if header != TABLE_COLUMNS:
                raise ValueError(f"tabulated spectrum header must be {','.join(TABLE_COLUMNS)}")
            rows = np.array([[float(v) for v in row] for row in reader if row])
        axes = [np.unique(rows[:, i]) for i in range(4)]
        shape = tuple(len(a) for a in axes)
        if rows.shape[0] != int(np.prod(shape)):
            raise ValueError("tabulated spectrum is not a complete regular grid")
        idx = [np.searchsorted(axes[i], rows[:, i]) for i in range(4)]
        values = np.empty(shape + (10,))
        values[tuple(idx)] = rows[:, 4:]
        return cls(axes, values, scale)

    def _lookup(self, p, upsilon):
        p = np.asarray(p, float)
        ups = np.broadcast_to(np.asarray(upsilon, float), p.shape[:-1])
        if self.frozen:
            pts = p
        else:
            pts = np.concatenate([p, ups[..., None]], axis=-1)
        flat = pts.reshape(-1, pts.shape[-1])
        plus = self._interp(flat)
        minus = self._interp(-flat)
        out = 0.5 * (plus + minus)
        if np.any(np.isnan(out)):
            raise TabulationOutOfRange("spectral argument outside the tabulated grid")
        return self.scale * out.reshape(p.shape[:-1] + (10,))

    def tensor(self, p, upsilon=0.0):
        vals = self._lookup(p, upsilon)
        out = np.empty(vals.shape[:-1] + (4, 4))
        for n, (i, j) in enumerate(_TRI):
            out[..., i, j] = vals[..., n]
            out[..., j, i] = vals[..., n]
        return out

    def rc(self, p, upsilon=0.0):
        return self.tensor(p, upsilon)[..., 0, 0]

    def rv(self, p, upsilon=0.0):
        return self.tensor(p, upsilon)[..., 1:, 1:]

    def rcv(self, p, upsilon=0.0):
        return self.tensor(p, upsilon)[..., 1:, 0]

    def sup_c(self, q):
        return np.where(np.asarray(q) <= self._pmax, self._max[0], 0.0)

    def sup_v(self, q):
        bound = 3.0 * max(self._max[4:].max(), 0.0)
        return np.where(np.asarray(q) <= self._pmax, bound, 0.0)

    def support_radius(self):
        return self._pmax

    def resolution_length(self):
        p1 = self.axes[0]
        return 1.0 / max(np.diff(p1).min(), 1e-300)


def assemble_correlation_tensor(model: SpectrumModel, eta: SpectralArgument):
    """4x4 block tensor ``[[R_c, R_cv^T], [R_cv, R_v]]`` at ``eta``.

    Frozen models return the spatial density (the ``upsilon`` value is ignored).
    """
    p, ups = eta.p, eta.upsilon
    if isinstance(model, TabulatedSpectrum):
        return model.tensor(p, ups)
    shape = p.shape[:-1]
    out = np.zeros(shape + (4, 4))
    out[..., 0, 0] = model.rc(p, ups)
    cv = model.rcv(p, ups)
    out[..., 1:, 0] = cv
    out[..., 0, 1:] = cv
    out[..., 1:, 1:] = model.rv(p, ups)
    return out

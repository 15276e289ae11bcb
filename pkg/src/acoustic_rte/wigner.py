"""Discrete Wigner transforms of synthetic 1+1 dimensional wavefields.

The continuous transform in standard quantization is

    W(x, t; k, w) = (2 pi)^-2 ∫∫ exp(i (y k + s w)) u(x - eps y, t - eps s) conj(u(x, t)) dy ds,

so a plane wave ``exp(i (k0 x + w0 t) / eps)`` concentrates at ``(k0, w0)``.
On a grid the lag ``eps*y`` runs over multiples of ``dx``, which makes the dual
wavenumber grid ``k_n = 2 pi n eps / (M dx)`` with ``|k| <= pi eps / dx``.  The
lag products are gathered, tapered, and inverse-FFT'd along the lag axes.

Self-transforms in standard quantization are complex; the stored array is the
real part, i.e. the average of the standard and anti-standard transforms.
The taper equals one at zero lag, so the k-integral of the array reproduces
``|u|^2`` and the w-integral reproduces the spatial transform to rounding.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import GridTooCoarse
from .flow import AmbientState, FlowModel, evaluate_flow

__all__ = [
    "SampledField", "WignerArray", "Taper", "wigner_transform_xt", "wigner_transform_x",
    "energy_densities", "observe", "smooth_x", "plane_waves", "gaussian_packet",
    "oscillation_example", "sample_grid",
]


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def sample_grid(nx, nt, dx, dt, x0=0.0, t0=0.0):
    """Return the sample coordinates ``(x, t)`` as 1-d arrays."""
    return x0 + dx * np.arange(nx), t0 + dt * np.arange(nt)


@dataclass(frozen=True)
class SampledField:
    """Complex samples ``values[ix, it]`` on a uniform space-time grid."""

    values: np.ndarray
    dx: float
    dt: float
    eps: float
    x0: float = 0.0
    t0: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise ValueError("field samples must have shape (nx, nt)")
        for n in v.shape:
            if not _is_pow2(n):
                raise ValueError(f"grid sizes must be powers of two, got {v.shape}")
        if not (self.eps > 0.0 and self.dx > 0.0 and self.dt > 0.0):
            raise ValueError("eps, dx and dt must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, fn: Callable, nx, nt, dx, dt, eps, x0=0.0, t0=0.0):
        x, t = sample_grid(nx, nt, dx, dt, x0, t0)
        X, T = np.meshgrid(x, t, indexing="ij")
        return cls(fn(X, T), dx, dt, eps, x0, t0)

    @property
    def shape(self):
        return self.values.shape

    @property
    def x(self):
        return self.x0 + self.dx * np.arange(self.shape[0])

    @property
    def t(self):
        return self.t0 + self.dt * np.arange(self.shape[1])

    @property
    def k_max(self):
        return self.eps * np.pi / self.dx

    @property
    def omega_max(self):
        return self.eps * np.pi / self.dt

    def at_time(self, it: int) -> "SampledField":
        return SampledField(self.values[:, it:it + 1], self.dx, self.dt, self.eps,
                            self.x0, self.t[it])


@dataclass(frozen=True)
class Taper:
    """Lag window; ``kind`` is ``hann``, ``gauss`` (``width`` in lag units) or ``none``."""

    kind: str = "hann"
    width: float = 0.25

    def weights(self, lags, n_lags):
        lags = np.asarray(lags, dtype=float)
        if self.kind == "hann":
            return np.cos(np.pi * lags / n_lags) ** 2
        if self.kind == "gauss":
            return np.exp(-0.5 * (lags / (self.width * n_lags)) ** 2)
        if self.kind == "none":
            return np.ones_like(lags)
        raise ValueError(f"unknown taper {self.kind!r}")


@dataclass
class WignerArray:
    """Real Wigner values on ``(x, t, k, omega)`` with coordinate axes."""

    values: np.ndarray
    x: np.ndarray
    t: np.ndarray
    k: np.ndarray
    omega: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def dk(self):
        return self.k[1] - self.k[0] if self.k.size > 1 else 1.0

    @property
    def domega(self):
        return self.omega[1] - self.omega[0] if self.omega.size > 1 else 1.0

    def k_marginal(self):
        """Integral over omega, shape ``(nx, nt, nk)``."""
        return self.values.sum(axis=3) * self.domega

    def density(self):
        """Integral over ``(k, omega)``, shape ``(nx, nt)``."""
        return self.values.sum(axis=(2, 3)) * self.dk * self.domega

    def peak(self, ix: int, it: int):
        """Wavenumber, frequency and value of the largest bin at one grid point."""
        w = self.values[ix, it]
        i, j = np.unravel_index(np.argmax(w), w.shape)
        return self.k[i], self.omega[j], w[i, j]


def _dual_axis(n_lags, step, eps):
    n = np.arange(n_lags) - n_lags // 2
    return 2.0 * np.pi * eps * n / (n_lags * step)


def _check_grid(field: SampledField, n_lags_x, n_lags_t, k_range, omega_range):
    if not (_is_pow2(n_lags_x) and _is_pow2(n_lags_t)):
        raise ValueError("lag counts must be powers of two")
    if n_lags_x > field.shape[0] or n_lags_t > field.shape[1]:
        raise ValueError("lag counts cannot exceed the grid sizes")
    if k_range is not None and k_range > field.k_max:
        raise GridTooCoarse(f"|k| up to {k_range} requested but eps*pi/dx = {field.k_max}")
    if omega_range is not None and omega_range > field.omega_max:
        raise GridTooCoarse(
            f"|omega| up to {omega_range} requested but eps*pi/dt = {field.omega_max}")


def _gather(u, idx, lags, axis_len, boundary):
    src = idx[:, None] - lags[None, :]
    if boundary == "periodic":
        return u[src % axis_len], np.ones(src.shape, dtype=bool)
    inside = (src >= 0) & (src < axis_len)
    return u[np.clip(src, 0, axis_len - 1)], inside


def _indices(n, sel):
    if sel is None:
        return np.arange(n)
    if isinstance(sel, slice):
        return np.arange(n)[sel]
    return np.atleast_1d(np.asarray(sel, dtype=int))


def wigner_transform_xt(field: SampledField, taper: Taper = Taper(), n_lags_x=None,
                        n_lags_t=None, x_index=None, t_index=None, k_range=None,
                        omega_range=None, boundary="zero") -> WignerArray:
    """Space-time Wigner transform of ``field`` with itself.

    Parameters
    ----------
    field : SampledField
    taper : Taper
        Window applied on both lag axes, normalised to one at zero lag.
    n_lags_x, n_lags_t : int, optional
        Lag counts (powers of two), which set the ``k`` and ``omega`` grids.
        Defaults are half the grid sizes.
    x_index, t_index : slice or int array, optional
        Output points; all grid points by default.
    k_range, omega_range : float, optional
        Largest ``|k|`` / ``|omega|`` the caller needs resolved.
    boundary : {"zero", "periodic"}
        Treatment of lagged samples that fall outside the grid.

    Raises
    ------
    GridTooCoarse
        If the requested range exceeds the Nyquist limit ``eps*pi/dx``.
    """
    nx, nt = field.shape
    mx = n_lags_x or max(nx // 2, 1)
    mt = n_lags_t or max(nt // 2, 1)
    _check_grid(field, mx, mt, k_range, omega_range)
    ix = _indices(nx, x_index)
    it = _indices(nt, t_index)
    lx = np.arange(mx) - mx // 2
    lt = np.arange(mt) - mt // 2
    gx = taper.weights(lx, mx)
    gt = taper.weights(lt, mt)
    u = field.values
    # products u(x - m dx, t - q dt) conj(u(x, t)), gathered one time row at a time
    out = np.empty((ix.size, it.size, mx, mt))
    sx = ix[:, None] - lx[None, :]
    sx_in = (sx >= 0) & (sx < nx)
    for j, t0 in enumerate(it):
        st = t0 - lt
        st_in = (st >= 0) & (st < nt)
        if boundary == "periodic":
            block = u[(sx % nx)[:, :, None], (st % nt)[None, None, :]]
        else:
            block = u[np.clip(sx, 0, nx - 1)[:, :, None], np.clip(st, 0, nt - 1)[None, None, :]]
            block = block * (sx_in[:, :, None] & st_in[None, None, :])
        block = block * np.conj(u[ix, t0])[:, None, None] * gx[None, :, None] * gt[None, None, :]
        spec = np.fft.ifft2(np.fft.ifftshift(block, axes=(1, 2)), axes=(1, 2)) * (mx * mt)
        out[:, j] = np.fft.fftshift(spec, axes=(1, 2)).real
    scale = field.dx * field.dt / (field.eps ** 2 * (2.0 * np.pi) ** 2)
    out *= scale
    meta = {"taper": taper.kind, "taper_width": taper.width, "n_lags_x": mx,
            "n_lags_t": mt, "boundary": boundary, "eps": field.eps, "quantization": 0}
    return WignerArray(out, field.x[ix], field.t[it], _dual_axis(mx, field.dx, field.eps),
                       _dual_axis(mt, field.dt, field.eps), meta)


def wigner_transform_x(field: SampledField, it: int = 0, taper: Taper = Taper(), n_lags_x=None,
                       x_index=None, k_range=None, boundary="zero"):
    """Spatial Wigner transform at time index ``it``.

    Returns
    -------
    values : ndarray, shape (nx_out, nk)
    x, k : ndarray
    """
    nx = field.shape[0]
    mx = n_lags_x or max(nx // 2, 1)
    _check_grid(field, mx, 1, k_range, None)
    ix = _indices(nx, x_index)
    lx = np.arange(mx) - mx // 2
    u = field.values[:, it]
    block, inside = _gather(u, ix, lx, nx, boundary)
    block = block * inside * np.conj(u[ix])[:, None] * taper.weights(lx, mx)[None, :]
    spec = np.fft.ifft(np.fft.ifftshift(block, axes=1), axis=1) * mx
    values = np.fft.fftshift(spec, axes=1).real * field.dx / (2.0 * np.pi * field.eps)
    return values, field.x[ix], _dual_axis(mx, field.dx, field.eps)


def _ambient_line(state, x, t):
    """Sound speed, flow velocity along x1 and density on the ``(x, t)`` grid."""
    if isinstance(state, FlowModel):
        X, T = np.meshgrid(x, t, indexing="ij")
        pos = np.zeros(X.shape + (3,))
        pos[..., 0] = X
        s = evaluate_flow(state, pos, T)
        return s.c0, s.v0[..., 0], s.rho0
    if isinstance(state, AmbientState):
        c = np.broadcast_to(state.c0, (x.size, t.size))
        v = np.broadcast_to(state.v0[..., 0], (x.size, t.size))
        rho = np.broadcast_to(state.rho0, (x.size, t.size))
        return c, v, rho
    raise TypeError("state must be an AmbientState or a FlowModel")


def energy_densities(wigner: WignerArray, state):
    """Strain and kinetic energy densities over the ``(x, t)`` output points.

    The 1+1 reduction keeps the flow component along x:
    strain = ½ rho ∫∫ (Omega / c)² W dk dw with Omega = w + v k,
    kinetic = ½ rho ∫∫ k² W dk dw.

    Returns
    -------
    strain, kinetic : ndarray, shape (nx, nt)
    """
    c, v, rho = _ambient_line(state, wigner.x, wigner.t)
    k = wigner.k[None, None, :, None]
    w = wigner.omega[None, None, None, :]
    cell = wigner.dk * wigner.domega
    Omega = w + v[:, :, None, None] * k
    strain = 0.5 * rho * (wigner.values * (Omega / c[:, :, None, None]) ** 2).sum(axis=(2, 3)) * cell
    kinetic = 0.5 * rho * (wigner.values * k ** 2).sum(axis=(2, 3)) * cell
    return strain, kinetic


def observe(values, x, k, P: Callable, dx: float):
    """Trace pairing ``∫∫ P(x, k) W(x, k) dx dk`` for a spatial transform."""
    X, K = np.meshgrid(x, k, indexing="ij")
    dk = k[1] - k[0] if k.size > 1 else 1.0
    return float(np.sum(P(X, K) * values) * dx * dk)


def smooth_x(values, n_bins: int = 8, axis: int = 0):
    """Moving average over ``n_bins`` consecutive x samples (valid part only)."""
    kernel = np.ones(n_bins) / n_bins
    return np.apply_along_axis(lambda a: np.convolve(a, kernel, mode="valid"), axis, values)


# field synthesis

def plane_waves(X, T, waves: Sequence, eps):
    """Sum of ``a exp(i (k x + w t) / eps)`` over ``waves = [(a, k, w), ...]``."""
    u = np.zeros(np.broadcast(X, T).shape, dtype=complex)
    for a, k0, w0 in waves:
        u += a * np.exp(1j * (k0 * X + w0 * T) / eps)
    return u


def gaussian_packet(X, T, eps, k0, omega0=0.0, center=0.0, width=1.0, speed=0.0, amplitude=1.0):
    """``A(x - speed t) exp(i (k0 x + omega0 t) / eps)`` with a Gaussian envelope."""
    env = amplitude * np.exp(-0.5 * ((X - center - speed * T) / width) ** 2)
    return env * np.exp(1j * (k0 * X + omega0 * T) / eps)


def oscillation_example(X, eps, mean: Callable, amplitude: Callable):
    """Real oscillation ``mean(x) + amplitude(x) sin(x / eps)``."""
    return mean(X) + amplitude(X) * np.sin(X / eps)

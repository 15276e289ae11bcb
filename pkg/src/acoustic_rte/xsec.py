"""Scattering kernels and total cross-sections.

Kernel convention: ``sigma_{b, b'}(k | p)`` is the rate of conversion from the
state ``(p, b')`` into ``(k, b)``; it is ``sigma_d`` evaluated with both
wavevectors on their dispersion shells.  ``Sigma_b(k)`` is the loss rate of
``(k, b)`` built from the transposed kernel ``sigma_t``.

Two evaluation paths exist:

* ``smooth``: time-dependent spectra, full ``(p, upsilon)`` dependence,
  integrated over ``p`` in three dimensions;
* ``shell``: frozen spectra in a quiescent medium.  The frequency line
  ``2 pi delta`` is collapsed analytically onto ``|p| = |k|`` and only the
  direction of ``p`` is integrated.  Shell kernels are the coefficient of
  ``delta(c0 |p| - c0 |k|)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline

from .errors import (CorrelatedSpectraUnsupported, FrozenSpectrumRequiresShellPath,
                     MovingMedium, NotFrozen, QuadratureUnresolved, ZeroWavevector)
from .flow import AmbientState, branch_sign, doppler_frequencies
from .spectra import SpectrumModel

__all__ = [
    "BranchPair", "QuadratureSpec", "t_vector", "sigma_d", "sigma_t", "sigma_branch",
    "shell_sigma", "quiescent_sigma", "total_cross_section", "gain_cross_section",
    "scattered_rate", "shell_rates", "RateTable",
]

TWO_PI = 2.0 * math.pi
CUBE = TWO_PI ** 3


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


@dataclass(frozen=True)
class BranchPair:
    """Branch transition ``from_branch -> to_branch``."""

    from_branch: int
    to_branch: int

    def __post_init__(self):
        object.__setattr__(self, "from_branch", branch_sign(self.from_branch))
        object.__setattr__(self, "to_branch", branch_sign(self.to_branch))

    @classmethod
    def all(cls):
        return [cls(a, b) for a in (1, -1) for b in (1, -1)]

    @property
    def label(self):
        sym = {1: "+", -1: "-"}
        return sym[self.to_branch] + sym[self.from_branch]


@dataclass(frozen=True)
class QuadratureSpec:
    """Product Gauss rule: radial Gauss-Legendre x polar Gauss-Legendre x azimuthal trapezoid.

    Radial and polar nodes are split over panels graded towards the forward
    direction ``p = k``, where the spectra concentrate.
    """

    n_radial: int = 128
    n_polar: int = 64
    n_azimuth: int = 8
    nodes_per_length: float = 8.0
    min_panel_nodes: int = 8

    def __post_init__(self):
        if min(self.n_radial, self.n_polar, self.n_azimuth) < 1:
            raise ValueError("quadrature node counts must be positive")


def _omega(state, k, om):
    return om + _dot(state.v0, k)


def t_vector(state: AmbientState, k, omega, p, upsilon):
    """``T = 1/2 (Omega(xi) Omega(eta), Omega(xi + eta) p)`` as a ``(..., 4)`` array."""
    k = np.asarray(k, float)
    p = np.asarray(p, float)
    om_xi = _omega(state, k, omega)
    om_eta = _omega(state, p, upsilon)
    om_sum = np.asarray(omega, float) + np.asarray(upsilon, float) + _dot(state.v0, k + p)
    first = 0.5 * om_xi * om_eta
    vec = 0.5 * om_sum[..., None] * p
    return np.concatenate([np.asarray(first)[..., None], vec], axis=-1)


def _quadratic(c0, v0, k, om, p, ups, spectrum: SpectrumModel, transpose: bool, line: float = 1.0):
    """``T(xi, eta)^T R(xi - eta) T(xi or eta...)`` divided by ``(2 pi)^3 c0^2 |k||p|``.

    ``transpose`` selects the second T-vector of the transposed kernel, whose
    vector part carries ``k`` instead of ``p``.
    """
    kn = np.sqrt(_dot(k, k))
    pn = np.sqrt(_dot(p, p))
    vk = _dot(v0, k)
    vp = _dot(v0, p)
    om_xi = om + vk
    om_eta = ups + vp
    om_sum = om_xi + om_eta
    t0 = 0.5 * om_xi * om_eta
    q = k - p
    dq = om - ups
    value = np.zeros(np.broadcast_shapes(np.shape(t0), q.shape[:-1]))
    half = 0.5 * om_sum
    if spectrum.has_sound:
        value = value + t0 * t0 * spectrum.rc(q, dq)
    if spectrum.has_velocity:
        a = half[..., None] * p
        b = half[..., None] * k if transpose else a
        value = value + spectrum.velocity_form(q, dq, a, b)
        if spectrum.correlated:
            cv = spectrum.rcv(q, dq)
            value = value + t0 * (_dot(cv, a) + _dot(cv, b))
    return line * value / (CUBE * c0 * c0 * kn * pn)


def _require_smooth(spectrum):
    if spectrum.frozen:
        raise FrozenSpectrumRequiresShellPath(
            "frozen spectra carry a delta line in frequency; use the shell path")


def sigma_d(state: AmbientState, k, omega, p, upsilon, spectrum: SpectrumModel):
    """Differential cross-section ``sigma_d(xi | eta)`` for a time-dependent spectrum."""
    _require_smooth(spectrum)
    return _quadratic(state.c0, state.v0, np.asarray(k, float), np.asarray(omega, float),
                      np.asarray(p, float), np.asarray(upsilon, float), spectrum, False)


def sigma_t(state: AmbientState, k, omega, p, upsilon, spectrum: SpectrumModel):
    """Transposed kernel ``sigma_t(eta | xi)`` entering the loss rate of ``xi = (k, omega)``."""
    _require_smooth(spectrum)
    return _quadratic(state.c0, state.v0, np.asarray(k, float), np.asarray(omega, float),
                      np.asarray(p, float), np.asarray(upsilon, float), spectrum, True)


def _shell_omega(state, k, b):
    wp, wm = doppler_frequencies(state, k)
    return np.where(np.asarray(b) > 0, wp, wm)


def sigma_branch(state: AmbientState, k, p, pair: BranchPair, spectrum: SpectrumModel,
                 transpose: bool = False):
    """``sigma_{to, from}(k | p)`` with ``k`` on branch ``to`` and ``p`` on branch ``from``."""
    _require_smooth(spectrum)
    if spectrum.correlated:
        raise CorrelatedSpectraUnsupported("closed-form branch kernels assume R_cv = 0")
    k = np.asarray(k, float)
    p = np.asarray(p, float)
    om = _shell_omega(state, k, pair.to_branch)
    ups = _shell_omega(state, p, pair.from_branch)
    return _quadratic(state.c0, state.v0, k, om, p, ups, spectrum, transpose)


def _require_shell(state, spectrum):
    if not spectrum.frozen:
        raise NotFrozen("the shell path needs a frozen spectrum")
    if not state.quiescent:
        raise MovingMedium("the shell path needs a quiescent medium (v0 = 0)")


def shell_sigma(state: AmbientState, k, p_hat, pair: BranchPair, spectrum: SpectrumModel,
                transpose: bool = False):
    """Shell kernel: coefficient of ``delta(c0|p| - c0|k|)`` with ``p = |k| p_hat``.

    Cross-branch pairs vanish identically because their frequency argument
    ``+/- c0 (|k| + |p|)`` never meets the frozen line.
    """
    _require_shell(state, spectrum)
    k = np.asarray(k, float)
    kn = np.sqrt(_dot(k, k))
    if np.any(kn == 0.0):
        raise ZeroWavevector("k = 0")
    p_hat = np.asarray(p_hat, float)
    p = kn[..., None] * p_hat / np.sqrt(_dot(p_hat, p_hat))[..., None]
    if pair.from_branch != pair.to_branch:
        return np.zeros(np.broadcast_shapes(kn.shape, p.shape[:-1]))
    b = pair.to_branch
    om = -b * state.c0 * kn
    ups = -b * state.c0 * np.sqrt(_dot(p, p))
    # on the shell the frequency difference is exactly zero
    return _quadratic(state.c0, state.v0, k, om, p, om + 0.0 * ups, spectrum, transpose, line=TWO_PI)


def quiescent_sigma(state: AmbientState, k, p_hat, spectrum: SpectrumModel):
    """Elastic-shell cross-section of a quiescent medium with frozen perturbations.

    For sound-speed perturbations alone this is
    ``pi c0^2 |k|^2 R_c(k - p) / (2 (2 pi)^3)`` with ``|p| = |k|``.
    """
    return shell_sigma(state, k, p_hat, BranchPair(1, 1), spectrum)


# ---------------------------------------------------------------- quadrature rules


def _gauss_panels(edges, n_total, min_nodes):
    """Gauss-Legendre nodes on consecutive panels ``edges[i], edges[i+1]``."""
    edges = np.asarray(edges, float)
    widths = np.diff(edges)
    keep = widths > 0.0
    n_panels = max(int(keep.sum()), 1)
    n_each = max(min_nodes, int(math.ceil(n_total / n_panels)))
    x, w = np.polynomial.legendre.leggauss(n_each)
    nodes, weights = [], []
    for a, b in zip(edges[:-1][keep], edges[1:][keep]):
        nodes.append(0.5 * (b - a) * x + 0.5 * (a + b))
        weights.append(0.5 * (b - a) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _polar_rule(theta_scale, spec: QuadratureSpec):
    """Nodes in ``mu = cos(angle to k)`` graded towards ``mu = 1``."""
    gap = 0.5 * theta_scale * theta_scale
    edges = [2.0]
    while gap < edges[-1] / 4.0:
        edges.append(edges[-1] / 4.0)
    if len(edges) > 1:
        edges.append(0.0)
        one_minus = np.array(edges)
    else:
        one_minus = np.array([2.0, 0.0])
    mu_edges = 1.0 - one_minus
    return _gauss_panels(mu_edges, spec.n_polar, spec.min_panel_nodes)


def _radial_rule(kn, spectrum, spec: QuadratureSpec):
    """Nodes in ``|q| = |k - p|`` on ``[0, support radius]``.

    Panels follow the spectral peak scale and are refined geometrically
    towards ``|q| = |k|``, where ``p = 0`` leaves a cone-shaped kink.
    """
    reach = spectrum.support_radius()
    if not math.isfinite(reach):
        raise QuadratureUnresolved("spectrum has unbounded support; only the shell path applies")
    ell = spectrum.resolution_length()
    if spec.n_radial < spec.nodes_per_length * reach * ell * (1.0 - 1e-12):
        raise QuadratureUnresolved(
            f"{spec.n_radial} radial nodes do not resolve the correlation length {ell:.4g} "
            f"over [0, {reach:.4g}] (need {spec.nodes_per_length:g} per 1/l)")
    step = spectrum.peak_scale()
    edges = [0.0]
    while edges[-1] < reach:
        edges.append(min(reach, step * 2.0 ** (len(edges) - 1)))
    if kn < reach:
        edges += [kn] + [kn * (1.0 + sgn * 4.0 ** -j) for j in range(1, 5) for sgn in (-1.0, 1.0)]
    edges = np.unique(np.clip(edges, 0.0, reach))
    return _gauss_panels(edges, spec.n_radial, spec.min_panel_nodes)


_Q_POLAR_LEVELS = 6


def _q_polar_rule(spec: QuadratureSpec):
    """Nodes in ``mu = cos(angle between q and k)`` graded towards ``mu = 1``."""
    one_minus = [2.0] + [4.0 ** -j for j in range(_Q_POLAR_LEVELS)] + [0.0]
    return _gauss_panels(1.0 - np.array(one_minus), spec.n_polar, spec.min_panel_nodes)


def _frame(khat):
    helper = np.array([1.0, 0.0, 0.0]) if abs(khat[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(khat, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(khat, e1)
    return e1, e2


def _directions(khat, theta_scale, spec, axisymmetric):
    mu, wmu = _polar_rule(theta_scale, spec)
    n_phi = 1 if axisymmetric else spec.n_azimuth
    phi = TWO_PI * np.arange(n_phi) / n_phi
    e1, e2 = _frame(khat)
    sin = np.sqrt(np.clip(1.0 - mu * mu, 0.0, None))
    dirs = (mu[:, None, None] * khat
            + sin[:, None, None] * (np.cos(phi)[None, :, None] * e1 + np.sin(phi)[None, :, None] * e2))
    weights = wmu[:, None] * np.full(n_phi, TWO_PI / n_phi)[None, :]
    return dirs.reshape(-1, 3), weights.reshape(-1)


def _volume_nodes(state, k, spectrum, spec):
    """Product rule over ``p = k - q`` in spherical coordinates of ``q`` about ``k``.

    The spectrum depends on ``q``, so the direction-dependent projector at
    ``p = k`` becomes a smooth function of the coordinates.
    """
    k = np.asarray(k, float)
    kn = float(np.linalg.norm(k))
    if kn == 0.0:
        raise ZeroWavevector("k = 0")
    khat = k / kn
    r, wr = _radial_rule(kn, spectrum, spec)
    mu, wmu = _q_polar_rule(spec)
    axisym = state.quiescent and spectrum.isotropic
    n_phi = 1 if axisym else spec.n_azimuth
    phi = TWO_PI * np.arange(n_phi) / n_phi
    e1, e2 = _frame(khat)
    sin = np.sqrt(np.clip(1.0 - mu * mu, 0.0, None))
    dirs = (mu[:, None, None] * khat
            + sin[:, None, None] * (np.cos(phi)[None, :, None] * e1 + np.sin(phi)[None, :, None] * e2))
    wd = (wmu[:, None] * np.full(n_phi, TWO_PI / n_phi)[None, :]).reshape(-1)
    q = r[:, None, None] * dirs.reshape(-1, 3)[None, :, :]
    w = (r * r * wr)[:, None] * wd[None, :]
    return (k - q).reshape(-1, 3), w.reshape(-1)


def _shell_nodes(state, k, spectrum, spec):
    k = np.asarray(k, float)
    kn = float(np.linalg.norm(k))
    if kn == 0.0:
        raise ZeroWavevector("k = 0")
    theta = spectrum.peak_scale() / kn if math.isfinite(spectrum.resolution_length()) else 10.0
    dirs, wd = _directions(k / kn, theta, spec, spectrum.isotropic)
    # delta(c0|p| - c0|k|) dp = |k|^2 / c0 d(p_hat)
    return dirs, wd * kn * kn / float(state.c0)


def _scalar_state(state):
    if np.ndim(state.c0) != 0:
        raise ValueError("total cross-sections are evaluated at a single ambient state")


def _integrate(state, k, branch, spectrum, spec, mode):
    """Shared driver for the three phase-space integrals of the kernel."""
    _scalar_state(state)
    b = branch_sign(branch)
    k = np.asarray(k, float)
    if spectrum.null:
        return 0.0
    if spectrum.frozen:
        _require_shell(state, spectrum)
        dirs, w = _shell_nodes(state, k, spectrum, spec)
        pair = BranchPair(b, b)
        if mode == "loss":
            vals = shell_sigma(state, k, dirs, pair, spectrum, transpose=True)
        else:
            # gain and scattered rates coincide on the shell (|p| = |k|, R even)
            vals = shell_sigma(state, k, dirs, pair, spectrum)
        return float(np.dot(vals, w))
    p, w = _volume_nodes(state, k, spectrum, spec)
    total = 0.0
    for bp in (1, -1):
        if mode == "loss":
            om = _shell_omega(state, k, b)
            ups = _shell_omega(state, p, bp)
            vals = _quadratic(state.c0, state.v0, k, om, p, ups, spectrum, True)
        elif mode == "gain":
            om = _shell_omega(state, k, b)
            ups = _shell_omega(state, p, bp)
            vals = _quadratic(state.c0, state.v0, k, om, p, ups, spectrum, False)
        else:
            om = _shell_omega(state, p, bp)
            ups = _shell_omega(state, k, b)
            vals = _quadratic(state.c0, state.v0, p, om, np.broadcast_to(k, p.shape), ups,
                              spectrum, False)
        total += float(np.dot(vals, w))
    return total


def total_cross_section(state: AmbientState, k, branch, spectrum: SpectrumModel,
                        quadrature: QuadratureSpec | None = None) -> float:
    """Loss rate ``Sigma_b(k) = \\int sum_b' sigma_t(p, omega_b'(p) | k, omega_b(k)) dp``."""
    return _integrate(state, k, branch, spectrum, quadrature or QuadratureSpec(), "loss")


def gain_cross_section(state: AmbientState, k, branch, spectrum: SpectrumModel,
                       quadrature: QuadratureSpec | None = None) -> float:
    """``\\int sum_b' sigma_{b b'}(k | p) dp``, equal to the loss rate for conservative kernels."""
    return _integrate(state, k, branch, spectrum, quadrature or QuadratureSpec(), "gain")


def scattered_rate(state: AmbientState, k, branch, spectrum: SpectrumModel,
                   quadrature: QuadratureSpec | None = None) -> float:
    """Total rate deposited out of ``(k, b)``: ``\\int sum_b' sigma_{b' b}(p | k) dp``."""
    return _integrate(state, k, branch, spectrum, quadrature or QuadratureSpec(), "scattered")


def shell_rates(c0, k, spectrum: SpectrumModel, spec: QuadratureSpec | None = None):
    """Vectorised shell-path ``(loss, scattered)`` rates for a batch of wavevectors.

    ``c0`` has shape ``(N,)`` and ``k`` shape ``(N, 3)``; the branch does not
    matter on the shell of a quiescent medium.
    """
    spec = spec or QuadratureSpec()
    k = np.asarray(k, float)
    c0 = np.asarray(c0, float)
    kn = np.sqrt(_dot(k, k))
    if np.any(kn == 0.0):
        raise ZeroWavevector("k = 0")
    n = k.shape[0]
    if spectrum.null or n == 0:
        return np.zeros(n), np.zeros(n)
    theta = (spectrum.peak_scale() / kn.max()) if math.isfinite(spectrum.resolution_length()) else 10.0
    mu, wmu = _polar_rule(theta, spec)
    n_phi = 1 if spectrum.isotropic else spec.n_azimuth
    phi = TWO_PI * np.arange(n_phi) / n_phi
    khat = k / kn[:, None]
    helper = np.where(np.abs(khat[:, :1]) < 0.9, np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
    e1 = np.cross(khat, helper)
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    e2 = np.cross(khat, e1)
    sin = np.sqrt(np.clip(1.0 - mu * mu, 0.0, None))
    mu_g, phi_g = np.meshgrid(mu, phi, indexing="ij")
    sin_g = np.meshgrid(sin, phi, indexing="ij")[0]
    cm, cs, sn = mu_g.ravel(), (sin_g * np.cos(phi_g)).ravel(), (sin_g * np.sin(phi_g)).ravel()
    w = (wmu[:, None] * np.full(n_phi, TWO_PI / n_phi)).ravel()
    dirs = (cm[None, :, None] * khat[:, None, :] + cs[None, :, None] * e1[:, None, :]
            + sn[None, :, None] * e2[:, None, :])
    p = kn[:, None, None] * dirs
    kb = k[:, None, :]
    om = -(c0 * kn)[:, None]
    v0 = np.zeros(3)
    cc = c0[:, None]
    jac = (kn * kn / c0)[:, None]
    loss = _quadratic(cc, v0, kb, om, p, om, spectrum, True, line=TWO_PI)
    loss = (loss * jac) @ w
    if spectrum.correlated or not spectrum.divergence_free:
        scat = _quadratic(cc, v0, p, om, np.broadcast_to(kb, p.shape), om, spectrum, False, line=TWO_PI)
        scat = (scat * jac) @ w
    else:
        scat = loss.copy()
    return loss, scat


class RateTable:
    """Pre-computed loss and scattered rates of a quiescent medium with an isotropic spectrum.

    Rates then depend only on ``(c0, |k|)`` and are the same on both branches.
    They are tabulated on a logarithmic ``|k|`` grid (and a linear ``c0`` grid
    when the sound speed varies) and interpolated with cubic splines.  Frozen
    spectra use the shell rates, time-dependent ones the volume quadrature.
    """

    def __init__(self, spectrum: SpectrumModel, k_range, c_range, quadrature=None,
                 n_k=64, n_c=9, rho0=1.0):
        if not spectrum.isotropic:
            raise ValueError("RateTable needs an isotropic spectrum")
        quadrature = quadrature or QuadratureSpec()
        k_lo, k_hi = float(k_range[0]), float(k_range[1])
        if not 0.0 < k_lo <= k_hi:
            raise ValueError("k range must be positive")
        if k_hi < 1.05 * k_lo:
            k_lo, k_hi = k_lo / 1.05, k_hi * 1.05
        c_lo, c_hi = float(c_range[0]), float(c_range[1])
        self.log_k = np.linspace(math.log(k_lo), math.log(k_hi), n_k)
        self.c = np.array([c_lo]) if c_hi == c_lo else np.linspace(c_lo, c_hi, n_c)
        self.k_range = (k_lo, k_hi)
        self.c_range = (c_lo, c_hi)
        self.spectrum = spectrum
        same = spectrum.divergence_free and not spectrum.correlated
        shape = (len(self.c), len(self.log_k))
        loss = np.empty(shape)
        scat = np.empty(shape)
        kv = np.zeros((n_k, 3))
        kv[:, 2] = np.exp(self.log_k)
        for ci, c in enumerate(self.c):
            if spectrum.frozen:
                loss[ci], scat[ci] = shell_rates(np.full(n_k, c), kv, spectrum, quadrature)
                continue
            state = AmbientState(c, np.zeros(3), rho0)
            for ki in range(n_k):
                loss[ci, ki] = total_cross_section(state, kv[ki], 1, spectrum, quadrature)
                scat[ci, ki] = loss[ci, ki] if same else scattered_rate(state, kv[ki], 1, spectrum,
                                                                         quadrature)
        self.loss = loss
        self.scattered = scat
        self.conservative = same
        self._loss_fit = self._fit(loss)
        self._scat_fit = self._fit(scat)

    def _fit(self, grid):
        if len(self.c) == 1:
            return CubicSpline(self.log_k, grid[0])
        return RectBivariateSpline(self.c, self.log_k, grid, kx=min(3, len(self.c) - 1), ky=3)

    @property
    def max_rate(self) -> float:
        return float(self.loss.max())

    def covers(self, c0, kn):
        lo, hi = self.k_range
        kn = np.asarray(kn, float)
        c0 = np.asarray(c0, float)
        ok = (kn >= lo * (1 - 1e-12)) & (kn <= hi * (1 + 1e-12))
        return ok & (c0 >= self.c_range[0] * (1 - 1e-12)) & (c0 <= self.c_range[1] * (1 + 1e-12))

    def _eval(self, fit, c0, kn):
        kn = np.asarray(kn, float)
        c0 = np.broadcast_to(np.asarray(c0, float), kn.shape)
        if not np.all(self.covers(c0, kn)):
            raise ValueError("(c0, |k|) outside the tabulated range")
        lk = np.log(kn)
        value = fit(lk) if len(self.c) == 1 else fit.ev(c0, lk)
        return np.maximum(value, 0.0)

    def loss_rate(self, c0, kn):
        return self._eval(self._loss_fit, c0, kn)

    def scattered_rate(self, c0, kn):
        if self.conservative:
            return self.loss_rate(c0, kn)
        return self._eval(self._scat_fit, c0, kn)

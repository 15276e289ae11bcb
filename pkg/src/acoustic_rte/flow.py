"""Ambient flow models and the slow-scale symbols of the dispersion relation.

Every model is assembled from :class:`ScalarField` terms of the form

    f(x, t) = const + grad . x + rate * t + sum_j A_j sin(kappa_j . x + nu_j t + phase_j)

so values, spatial gradients and time derivatives are all analytic.  Arrays
are broadcast: positions have shape ``(..., 3)`` and times shape ``(...)``.

Branches are encoded as ``+1`` / ``-1``.  The Doppler frequencies follow the
convention ``omega_pm = -v0.k -/+ c0 |k|``; ``lambda_frequencies`` gives the
opposite-sign pair ``lambda_pm = -omega_pm`` for callers that prefer it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import NonPhysical, OutOfDomain, ZeroWavevector

__all__ = [
    "AmbientState", "PhasePoint", "Box", "ScalarField", "FlowFields", "FlowModel",
    "Uniform", "LinearSoundSpeed", "LinearShear", "Composite",
    "evaluate_flow", "omega_symbol", "doppler_frequencies", "lambda_frequencies",
    "group_velocity", "hamiltonian", "branch_sign",
]


def branch_sign(branch) -> int:
    """Normalise ``'+'``, ``'-'``, ``+1`` or ``-1`` to an integer sign."""
    if isinstance(branch, str):
        if branch in ("+", "plus"):
            return 1
        if branch in ("-", "minus"):
            return -1
        raise ValueError(f"unknown branch {branch!r}")
    b = int(branch)
    if b not in (1, -1):
        raise ValueError(f"branch must be +1 or -1, got {branch!r}")
    return b


def _dot(a, b):
    # explicit sums keep batched and single-point arithmetic bit-identical
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def _kmag(k):
    k = np.asarray(k, dtype=float)
    kn = np.sqrt(_dot(k, k))
    if np.any(kn == 0.0):
        raise ZeroWavevector("wavevector k = 0 is excluded from phase space")
    return k, kn


@dataclass(frozen=True)
class PhasePoint:
    x: np.ndarray
    t: float
    k: np.ndarray
    omega: float

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        k = np.asarray(self.k, dtype=float)
        if not np.all(np.any(k != 0.0, axis=-1)):
            raise ZeroWavevector("PhasePoint requires k != 0")
        object.__setattr__(self, "k", k)


@dataclass(frozen=True)
class AmbientState:
    """Ambient quantities and their derivatives at one (or many) space-time points.

    Fields may be scalars/3-vectors or batches thereof; ``a = rho0 / c0**2`` is
    always derived, never stored.
    """

    c0: np.ndarray
    v0: np.ndarray
    rho0: np.ndarray
    grad_c0: np.ndarray = None
    grad_v0: np.ndarray = None
    dt_c0: np.ndarray = None
    dt_v0: np.ndarray = None

    def __post_init__(self):
        c0 = np.asarray(self.c0, dtype=float)
        v0 = np.asarray(self.v0, dtype=float)
        rho0 = np.asarray(self.rho0, dtype=float)
        if np.any(~(c0 > 0.0)):
            raise NonPhysical(f"sound speed must be positive, got min {np.min(c0)!r}")
        if np.any(~(rho0 > 0.0)):
            raise NonPhysical(f"density must be positive, got min {np.min(rho0)!r}")
        shape = c0.shape
        defaults = {
            "grad_c0": np.zeros(shape + (3,)),
            "grad_v0": np.zeros(shape + (3, 3)),
            "dt_c0": np.zeros(shape),
            "dt_v0": np.zeros(shape + (3,)),
        }
        object.__setattr__(self, "c0", c0)
        object.__setattr__(self, "v0", np.broadcast_to(v0, shape + (3,)).astype(float))
        object.__setattr__(self, "rho0", np.broadcast_to(rho0, shape).astype(float))
        for name, default in defaults.items():
            value = getattr(self, name)
            value = default if value is None else np.asarray(value, dtype=float)
            object.__setattr__(self, name, value)

    @property
    def a(self):
        return self.rho0 / self.c0 ** 2

    @property
    def quiescent(self) -> bool:
        return bool(np.all(self.v0 == 0.0))


@dataclass(frozen=True)
class Box:
    """Axis-aligned space-time validity box."""

    lo: np.ndarray = field(default_factory=lambda: np.full(3, -1.0e4))
    hi: np.ndarray = field(default_factory=lambda: np.full(3, 1.0e4))
    t_lo: float = 0.0
    t_hi: float = 1.0e4

    def __post_init__(self):
        lo = np.broadcast_to(np.asarray(self.lo, dtype=float), (3,)).copy()
        hi = np.broadcast_to(np.asarray(self.hi, dtype=float), (3,)).copy()
        if np.any(hi <= lo) or not self.t_hi > self.t_lo:
            raise ValueError("validity box must have hi > lo on every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def contains(self, x, t=None):
        x = np.asarray(x, dtype=float)
        inside = np.all((x >= self.lo) & (x <= self.hi), axis=-1)
        if t is not None:
            t = np.asarray(t, dtype=float)
            inside = inside & (t >= self.t_lo) & (t <= self.t_hi)
        return inside

    def corners(self):
        idx = np.array(np.meshgrid([0, 1], [0, 1], [0, 1], indexing="ij")).reshape(3, -1).T
        return np.where(idx == 0, self.lo, self.hi)


@dataclass(frozen=True)
class ScalarField:
    """Affine-plus-sinusoid scalar field with analytic derivatives.

    ``modes`` is a sequence of ``(amplitude, kappa(3), nu, phase)`` tuples.
    """

    const: float = 0.0
    grad: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rate: float = 0.0
    modes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "grad", np.broadcast_to(np.asarray(self.grad, float), (3,)).copy())
        modes = []
        for amp, kappa, nu, phase in self.modes:
            modes.append((float(amp), np.broadcast_to(np.asarray(kappa, float), (3,)).copy(),
                          float(nu), float(phase)))
        object.__setattr__(self, "modes", tuple(modes))

    @property
    def steady(self) -> bool:
        return self.rate == 0.0 and all(nu == 0.0 or amp == 0.0 for amp, _, nu, _ in self.modes)

    @property
    def identically_zero(self) -> bool:
        return (self.const == 0.0 and not np.any(self.grad) and self.rate == 0.0
                and all(amp == 0.0 for amp, *_ in self.modes))

    def evaluate(self, x, t):
        """Return ``(value, gradient, time derivative)`` broadcast over ``x``, ``t``."""
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        shape = x.shape[:-1] if t.ndim == 0 else np.broadcast_shapes(x.shape[:-1], t.shape)
        value = np.zeros(shape)
        value += self.const + _dot(x, self.grad) + self.rate * t
        grad = np.empty(shape + (3,))
        grad[...] = self.grad
        dt = np.full(shape, self.rate)
        for amp, kappa, nu, phase in self.modes:
            arg = _dot(x, kappa) + nu * t + phase
            s = amp * np.sin(arg)
            c = amp * np.cos(arg)
            value += s
            grad += c[..., None] * kappa
            dt += c * nu
        return value, grad, dt


class FlowFields(NamedTuple):
    c: np.ndarray
    v: np.ndarray
    rho: np.ndarray
    grad_c: np.ndarray
    grad_v: np.ndarray  # [..., i, j] = d v_i / d x_j
    dt_c: np.ndarray
    dt_v: np.ndarray

    def state(self) -> AmbientState:
        return AmbientState(self.c, self.v, self.rho, self.grad_c, self.grad_v, self.dt_c, self.dt_v)


class FlowModel:
    """Base class: a sound speed, velocity and density built from scalar fields."""

    kind = "abstract"
    n_validation_samples = 4096

    def __init__(self, c: ScalarField, v: Sequence[ScalarField], rho: ScalarField, box: Box | None):
        self.c = c
        self.v = tuple(v)
        self.rho = rho
        self.box = box if box is not None else Box()
        if len(self.v) != 3:
            raise ValueError("velocity needs three scalar components")
        self._validate_positive()

    def _validate_positive(self):
        rng = np.random.default_rng(0)
        n = self.n_validation_samples
        box = self.box
        x = box.lo + (box.hi - box.lo) * rng.random((n, 3))
        t = box.t_lo + (box.t_hi - box.t_lo) * rng.random(n)
        corners = box.corners()
        x = np.concatenate([x, corners, corners])
        t = np.concatenate([t, np.full(8, box.t_lo), np.full(8, box.t_hi)])
        c, _, _ = self.c.evaluate(x, t)
        rho, _, _ = self.rho.evaluate(x, t)
        if np.any(c <= 0.0):
            raise NonPhysical(f"{self.kind}: sound speed not positive inside the validity box "
                              f"(min sampled {c.min():.6g})")
        if np.any(rho <= 0.0):
            raise NonPhysical(f"{self.kind}: density not positive inside the validity box")
        self._c_sampled = (float(c.min()), float(c.max()))

    @property
    def steady(self) -> bool:
        return self.c.steady and all(f.steady for f in self.v)

    @property
    def quiescent(self) -> bool:
        return all(f.identically_zero for f in self.v)

    @property
    def homogeneous_c(self) -> bool:
        return self.c.identically_zero or (not np.any(self.c.grad) and self.c.rate == 0.0
                                           and all(a == 0.0 for a, *_ in self.c.modes))

    def sound_speed_range(self):
        """Sampled (min, max) of the sound speed over the validity box."""
        return self._c_sampled

    def fields(self, x, t) -> FlowFields:
        """Vectorised evaluation without domain checks (used inside integrators)."""
        c, gc, dc = self.c.evaluate(x, t)
        rho, _, _ = self.rho.evaluate(x, t)
        comps = [f.evaluate(x, t) for f in self.v]
        v = np.stack([cv[0] for cv in comps], axis=-1)
        gv = np.stack([cv[1] for cv in comps], axis=-2)
        dv = np.stack([cv[2] for cv in comps], axis=-1)
        return FlowFields(c, v, rho, gc, gv, dc, dv)

    def __repr__(self):
        return f"{type(self).__name__}(box={self.box})"


class Uniform(FlowModel):
    kind = "uniform"

    def __init__(self, c0, v0=(0.0, 0.0, 0.0), rho0=1.0, box=None):
        v0 = np.broadcast_to(np.asarray(v0, float), (3,))
        super().__init__(ScalarField(float(c0)), [ScalarField(float(vi)) for vi in v0],
                         ScalarField(float(rho0)), box)


class LinearSoundSpeed(FlowModel):
    """``c0(x) = c_a + g * (direction . x)`` in a quiescent medium."""

    kind = "linear_c"

    def __init__(self, c_a, g, direction=(0.0, 0.0, 1.0), rho0=1.0, box=None):
        d = np.asarray(direction, float)
        d = d / np.linalg.norm(d)
        super().__init__(ScalarField(float(c_a), g * d), [ScalarField() for _ in range(3)],
                         ScalarField(float(rho0)), box)


class LinearShear(FlowModel):
    """``v0(x) = v_base + S x`` with constant sound speed and density."""

    kind = "linear_shear"

    def __init__(self, c0, v_base=(0.0, 0.0, 0.0), shear=np.zeros((3, 3)), rho0=1.0, box=None):
        v_base = np.broadcast_to(np.asarray(v_base, float), (3,))
        shear = np.asarray(shear, float).reshape(3, 3)
        super().__init__(ScalarField(float(c0)),
                         [ScalarField(v_base[i], shear[i]) for i in range(3)],
                         ScalarField(float(rho0)), box)


class Composite(FlowModel):
    """Arbitrary affine-plus-sinusoid fields for c0, each v0 component and rho0."""

    kind = "composite"

    def __init__(self, c: ScalarField, v: Sequence[ScalarField] | None = None,
                 rho: ScalarField | None = None, box=None):
        v = v if v is not None else [ScalarField() for _ in range(3)]
        rho = rho if rho is not None else ScalarField(1.0)
        super().__init__(c, v, rho, box)


def evaluate_flow(model: FlowModel, x, t) -> AmbientState:
    """Evaluate ``model`` at ``(x, t)`` with validity-box and positivity checks."""
    x = np.asarray(x, dtype=float)
    if not np.all(model.box.contains(x, t)):
        raise OutOfDomain(f"(x, t) = ({x}, {t}) outside the validity box of {model.kind}")
    f = model.fields(x, t)
    if np.any(f.c <= 0.0):
        raise NonPhysical(f"non-positive sound speed {f.c} at {x}")
    return f.state()


def omega_symbol(state: AmbientState, k, omega):
    """``Omega = omega + v0 . k``."""
    return np.asarray(omega, dtype=float) + _dot(state.v0, np.asarray(k, dtype=float))


def doppler_frequencies(state: AmbientState, k):
    """Shell frequencies ``(omega_plus, omega_minus)`` with ``H = 0`` on both."""
    k, kn = _kmag(k)
    conv = _dot(state.v0, k)
    return -conv - state.c0 * kn, -conv + state.c0 * kn


def lambda_frequencies(state: AmbientState, k):
    """Opposite-sign convention ``lambda_pm = v0.k +/- c0|k| = -omega_pm``."""
    wp, wm = doppler_frequencies(state, k)
    return -wp, -wm


def group_velocity(state: AmbientState, k, branch):
    """``v_g = v0 +/- c0 k_hat``."""
    s = branch_sign(branch) if np.ndim(branch) == 0 else np.asarray(branch)
    k, kn = _kmag(k)
    return state.v0 + (s * state.c0 / kn)[..., None] * k


def hamiltonian(state: AmbientState, k, omega):
    """``H = (Omega**2 - c0**2 |k|**2) / 2``."""
    k = np.asarray(k, dtype=float)
    om = omega_symbol(state, k, omega)
    return 0.5 * (om * om - state.c0 ** 2 * _dot(k, k))

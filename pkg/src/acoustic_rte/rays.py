"""Hamiltonian ray tracing in physical time.

Along a ray of branch ``b`` the phase point obeys

    dx/dt = v0 + b c0 k_hat
    dk/dt = -(grad v0)^T k - b |k| grad c0
    domega/dt = -(d_t v0) . k - b |k| d_t c0

and the wave action is constant.  Nothing is projected back onto the
dispersion shell: the drift ``|H| / (c0 |k|)^2`` is measured and gated.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import OnShellDriftExceeded, OutOfDomain, StepLimitExceeded, ZeroWavevector
from .flow import FlowModel, PhasePoint, branch_sign, doppler_frequencies, evaluate_flow

__all__ = [
    "RayState", "IntegratorSpec", "Trajectory", "ray_rhs", "integrate_ray",
    "hamiltonian_drift", "trace_rays", "launch", "rk4_step", "step_grid", "push_forward",
]

K_FLOOR = 1e-9


@dataclass(frozen=True)
class RayState:
    phase: PhasePoint
    branch: int
    action: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "branch", branch_sign(self.branch))
        if self.action < 0.0:
            raise ValueError("wave action must be non-negative")


@dataclass(frozen=True)
class IntegratorSpec:
    """``scheme`` is ``"rk4"`` (fixed ``dt``) or ``"rk45"`` (adaptive, ``rtol``/``atol``).

    ``tol_h`` bounds the relative Hamiltonian drift; ``None`` disables the gate.
    """

    scheme: str = "rk4"
    dt: float = 1e-3
    rtol: float = 1e-10
    atol: float = 1e-12
    max_steps: int = 10_000_000
    tol_h: float | None = 1e-6

    def __post_init__(self):
        if self.scheme not in ("rk4", "rk45"):
            raise ValueError(f"unknown integrator scheme {self.scheme!r}")
        if not self.dt > 0.0 or not self.rtol > 0.0 or not self.atol > 0.0:
            raise ValueError("dt and tolerances must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass
class Trajectory:
    """Sampled ray: arrays over samples plus termination bookkeeping."""

    t: np.ndarray
    x: np.ndarray
    k: np.ndarray
    omega: np.ndarray
    h_rel: np.ndarray
    branch: int
    action: float
    exited: bool = False
    exit_time: float = math.nan
    steps: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    def state(self, i=-1) -> RayState:
        return RayState(PhasePoint(self.x[i], float(self.t[i]), self.k[i], float(self.omega[i])),
                        self.branch, self.action)


def _dot(a, b):
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def _rhs(model: FlowModel, x, t, k, b):
    f = model.fields(x, t)
    kn = np.sqrt(_dot(k, k))
    bc = b * f.c / kn
    dx = f.v + bc[..., None] * k
    gv = f.grad_v
    # (grad v0)^T k with grad_v[..., i, j] = d v_i / d x_j
    gtk = gv[..., 0, :] * k[..., 0:1] + gv[..., 1, :] * k[..., 1:2] + gv[..., 2, :] * k[..., 2:3]
    dk = -gtk - (b * kn)[..., None] * f.grad_c
    dw = -_dot(f.dt_v, k) - b * kn * f.dt_c
    return dx, dk, dw


def rk4_step(model: FlowModel, x, t, k, b, dt):
    """One classical RK4 step for ``(x, k, omega-increment)``; batched over leading axes.

    Returns ``(x_new, k_new, d_omega)``.  The transport solver calls this exact
    function, so scattering-free transport and ray tracing agree bit for bit.
    """
    dt = np.asarray(dt, float)
    h = dt[..., None]
    half = 0.5 * dt
    x1, k1, w1 = _rhs(model, x, t, k, b)
    x2, k2, w2 = _rhs(model, x + 0.5 * h * x1, t + half, k + 0.5 * h * k1, b)
    x3, k3, w3 = _rhs(model, x + 0.5 * h * x2, t + half, k + 0.5 * h * k2, b)
    x4, k4, w4 = _rhs(model, x + h * x3, t + dt, k + h * k3, b)
    xn = x + (h / 6.0) * (x1 + 2.0 * x2 + 2.0 * x3 + x4)
    kn = k + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    dw = (dt / 6.0) * (w1 + 2.0 * w2 + 2.0 * w3 + w4)
    return xn, kn, dw


def ray_rhs(model: FlowModel, ray: RayState):
    """Right-hand side ``(dx/dt, dk/dt, domega/dt)`` at the ray's phase point."""
    ph = ray.phase
    k = np.asarray(ph.k, float)
    if not np.linalg.norm(k) > 0.0:
        raise ZeroWavevector("k = 0")
    evaluate_flow(model, ph.x, ph.t)  # domain and positivity checks
    dx, dk, dw = _rhs(model, np.asarray(ph.x, float), float(ph.t), k, ray.branch)
    return dx, dk, float(dw)


def launch(model: FlowModel, x, k, branch, t=0.0, action=1.0) -> RayState:
    """Ray state with ``omega`` placed on the requested dispersion branch."""
    b = branch_sign(branch)
    state = evaluate_flow(model, x, t)
    wp, wm = doppler_frequencies(state, k)
    return RayState(PhasePoint(x, t, k, float(wp if b > 0 else wm)), b, action)


def _h_rel(model, x, t, k, omega):
    f = model.fields(x, t)
    om = omega + _dot(f.v, k)
    ck2 = f.c ** 2 * _dot(k, k)
    return np.abs(0.5 * (om * om - ck2)) / ck2


def step_grid(t0, t_final, sample_times, dt):
    """Step boundaries of at most ``dt`` that hit every sample time exactly."""
    if sample_times is None:
        marks = np.array([t0, t_final])
    else:
        marks = np.unique(np.concatenate([[t0], np.asarray(sample_times, float), [t_final]]))
        marks = marks[(marks >= t0) & (marks <= t_final)]
    pieces = [np.array([t0])]
    for a, b in zip(marks[:-1], marks[1:]):
        n = max(1, int(math.ceil((b - a) / dt - 1e-9)))
        pieces.append(a + (b - a) * np.arange(1, n + 1) / n)
        pieces[-1][-1] = b
    grid = np.concatenate(pieces)
    if sample_times is None:
        keep = np.ones(len(grid), bool)
    else:
        keep = np.isin(grid, marks)
    return grid, keep


def integrate_ray(model: FlowModel, init: RayState, spec: IntegratorSpec | None = None,
                  t_final: float = 1.0, sample_times=None, on_exit: str = "stop") -> Trajectory:
    """Integrate a ray from ``init`` to ``t_final``.

    Samples are returned at every step (``sample_times=None``) or at the
    requested times.  Leaving the validity box stops the ray and records the
    exit (``on_exit="stop"``) or raises :class:`OutOfDomain` (``"raise"``).
    """
    spec = spec or IntegratorSpec()
    ph = init.phase
    t0 = float(ph.t)
    if not t_final >= t0:
        raise ValueError("t_final must not precede the initial time")
    evaluate_flow(model, ph.x, t0)
    x = np.asarray(ph.x, float).copy()
    k = np.asarray(ph.k, float).copy()
    k_floor = K_FLOOR * np.linalg.norm(k)
    if spec.scheme == "rk4":
        traj = _integrate_rk4(model, init, spec, t0, t_final, x, k, k_floor, sample_times, on_exit)
    else:
        traj = _integrate_rk45(model, init, spec, t0, t_final, x, k, k_floor, sample_times, on_exit)
    drift = hamiltonian_drift(traj)
    traj.meta["max_h_rel"] = drift
    if spec.tol_h is not None and drift > spec.tol_h:
        raise OnShellDriftExceeded(drift, spec.tol_h)
    return traj


def _exit(model, x, t, on_exit):
    if model.box.contains(x, t):
        return False
    if on_exit == "raise":
        raise OutOfDomain(f"ray left the validity box at t = {t:.6g}, x = {x}")
    return True


def _integrate_rk4(model, init, spec, t0, t_final, x, k, k_floor, sample_times, on_exit):
    grid, keep = step_grid(t0, t_final, sample_times, spec.dt)
    n_steps = len(grid) - 1
    if n_steps > spec.max_steps:
        raise StepLimitExceeded(f"{n_steps} steps requested, max_steps = {spec.max_steps}")
    b = init.branch
    omega = float(init.phase.omega)
    xs = np.empty((len(grid), 3))
    ks = np.empty((len(grid), 3))
    ws = np.empty(len(grid))
    xs[0], ks[0], ws[0] = x, k, omega
    last = 0
    exited, exit_time = False, math.nan
    for i in range(n_steps):
        dt = grid[i + 1] - grid[i]
        xn, kn_, dw = rk4_step(model, x, grid[i], k, b, dt)
        if np.linalg.norm(kn_) < k_floor:
            raise ZeroWavevector(f"|k| collapsed below {K_FLOOR:g} of its initial value at t = {grid[i + 1]:.6g}")
        if _exit(model, xn, grid[i + 1], on_exit):
            exited, exit_time = True, float(grid[i + 1])
            break
        x, k, omega = xn, kn_, omega + float(dw)
        last = i + 1
        xs[last], ks[last], ws[last] = x, k, omega
    sel = keep[: last + 1].copy()
    if exited:
        sel[last] = True
    t = grid[: last + 1][sel]
    xs, ks, ws = xs[: last + 1][sel], ks[: last + 1][sel], ws[: last + 1][sel]
    h = _h_rel(model, xs, t, ks, ws)
    return Trajectory(t, xs, ks, ws, h, b, init.action, exited, exit_time, last)


def _integrate_rk45(model, init, spec, t0, t_final, x, k, k_floor, sample_times, on_exit):
    b = init.branch

    def fun(t, y):
        dx, dk, dw = _rhs(model, y[:3], t, y[3:6], b)
        return np.concatenate([dx, dk, [dw]])

    def leave(t, y):
        lo = y[:3] - model.box.lo
        hi = model.box.hi - y[:3]
        return min(lo.min(), hi.min())

    def collapse(t, y):
        return np.linalg.norm(y[3:6]) - k_floor

    leave.terminal = True
    collapse.terminal = True
    y0 = np.concatenate([x, k, [init.phase.omega]])
    t_eval = None if sample_times is None else np.unique(np.clip(
        np.concatenate([[t0], np.asarray(sample_times, float), [t_final]]), t0, t_final))
    t_end = min(t_final, model.box.t_hi)
    sol = solve_ivp(fun, (t0, t_end), y0, method="RK45", rtol=spec.rtol, atol=spec.atol,
                    t_eval=None if t_eval is None else t_eval[t_eval <= t_end],
                    events=(leave, collapse), dense_output=True)
    if sol.status == -1:
        raise StepLimitExceeded(sol.message)
    if len(sol.t_events[1]):
        raise ZeroWavevector(f"|k| collapsed at t = {sol.t_events[1][0]:.6g}")
    steps = int(sol.nfev // 6)
    if steps > spec.max_steps:
        raise StepLimitExceeded(f"{steps} adaptive steps exceed max_steps = {spec.max_steps}")
    exited = bool(len(sol.t_events[0])) or t_end < t_final
    if exited and on_exit == "raise":
        raise OutOfDomain("ray left the validity box")
    exit_time = float(sol.t_events[0][0]) if len(sol.t_events[0]) else (t_end if exited else math.nan)
    t = sol.t
    y = sol.y.T
    h = _h_rel(model, y[:, :3], t, y[:, 3:6], y[:, 6])
    return Trajectory(t, y[:, :3].copy(), y[:, 3:6].copy(), y[:, 6].copy(), h, b,
                      init.action, exited, exit_time, steps)


def hamiltonian_drift(trajectory: Trajectory) -> float:
    """Largest relative on-shell defect ``|H| / (c0 |k|)^2`` over the samples."""
    if len(trajectory.t) == 0:
        raise ValueError("empty trajectory")
    return float(np.max(trajectory.h_rel))


def _trace_one(args):
    model, ray, spec, t_final, sample_times = args
    return integrate_ray(model, ray, spec, t_final, sample_times)


def trace_rays(model: FlowModel, rays, spec: IntegratorSpec | None = None, t_final=1.0,
               sample_times=None, workers: int = 1):
    """Integrate many rays; the output order follows the input order."""
    jobs = [(model, r, spec, t_final, sample_times) for r in rays]
    if workers <= 1 or len(jobs) <= 1:
        return [_trace_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_trace_one, jobs))


def push_forward(model: FlowModel, x, k, branch, t0, t_final, dt, sample_times=None):
    """Batched scattering-free transport of phase points on the shared step grid.

    Returns ``{t: (x, k, inside)}`` at every sample time, where ``inside`` marks
    points that never left the validity box at a step boundary.
    """
    x = np.array(x, float)
    k = np.array(k, float)
    b = np.broadcast_to(np.asarray(branch, float), x.shape[:-1]).copy()
    grid, keep = step_grid(t0, t_final, sample_times, dt)
    inside = np.asarray(model.box.contains(x, t0)).copy()
    out = {}
    if keep[0]:
        out[float(grid[0])] = (x.copy(), k.copy(), inside.copy())
    for i in range(len(grid) - 1):
        x, k, _ = rk4_step(model, x, grid[i], k, b, grid[i + 1] - grid[i])
        inside &= model.box.contains(x, grid[i + 1])
        if keep[i + 1]:
            out[float(grid[i + 1])] = (x.copy(), k.copy(), inside.copy())
    return out

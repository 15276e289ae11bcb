import math

import numpy as np
import numpy.testing as npt
import pytest

from acoustic_rte.errors import OnShellDriftExceeded, OutOfDomain, StepLimitExceeded, ZeroWavevector
from acoustic_rte.flow import (Box, Composite, LinearSoundSpeed, PhasePoint, ScalarField, Uniform,
                               doppler_frequencies, evaluate_flow, group_velocity)
from acoustic_rte.rays import (IntegratorSpec, RayState, hamiltonian_drift, integrate_ray, launch,
                               push_forward, ray_rhs, step_grid, trace_rays)

BIG = Box(-1e4, 1e4, -1.0, 1e4)


def linear_model():
    box = Box(np.array([-50.0, -50.0, 0.0]), np.array([50.0, 50.0, 100.0]), 0.0, 100.0)
    return LinearSoundSpeed(1.0, 0.05, (0.0, 0.0, 1.0), box=box)


def test_uniform_rhs():
    m = Uniform(2.0, (0.5, 0.0, 0.0), box=BIG)
    ray = launch(m, np.zeros(3), np.array([0.0, 3.0, 0.0]), -1)
    dx, dk, dw = ray_rhs(m, ray)
    npt.assert_allclose(dx, [0.5, -2.0, 0.0])
    npt.assert_array_equal(dk, 0.0)
    assert dw == 0.0


def test_straight_ray_example():
    m = Uniform(1.0, box=BIG)
    traj = integrate_ray(m, launch(m, np.zeros(3), np.array([1.0, 0.0, 0.0]), 1), IntegratorSpec(dt=0.01), 2.0)
    npt.assert_allclose(traj.x[-1], [2.0, 0.0, 0.0], rtol=1e-13)
    npt.assert_array_equal(traj.k[-1], [1.0, 0.0, 0.0])
    assert traj.omega[-1] == -1.0
    assert hamiltonian_drift(traj) == pytest.approx(0.0, abs=1e-15)
    assert traj.action == 1.0


def test_moving_uniform_matches_group_velocity():
    m = Uniform(3.0, (0.4, -0.2, 1.0), box=BIG)
    k = np.array([0.3, 1.0, -0.5])
    for b in (1, -1):
        traj = integrate_ray(m, launch(m, np.zeros(3), k, b), IntegratorSpec(dt=0.5), 50.0)
        vg = group_velocity(evaluate_flow(m, np.zeros(3), 0.0), k, b)
        npt.assert_allclose(traj.x[-1], 50.0 * vg, rtol=1e-12)


def test_sampled_times_hit_exactly():
    m = Uniform(1.0, box=BIG)
    times = [0.1, 0.35, 1.0]
    traj = integrate_ray(m, launch(m, np.zeros(3), np.array([0.0, 0.0, 1.0]), 1),
                         IntegratorSpec(dt=0.07), 1.0, times)
    npt.assert_array_equal(traj.t, [0.0, 0.1, 0.35, 1.0])


def test_step_grid_respects_dt():
    grid, keep = step_grid(0.0, 1.0, [0.25, 0.3], 0.1)
    assert np.all(np.diff(grid) <= 0.1 + 1e-15)
    npt.assert_array_equal(grid[keep], [0.0, 0.25, 0.3, 1.0])


def test_rk4_fourth_order():
    m = linear_model()
    init = launch(m, np.array([0.0, 0.0, 10.0]), np.array([1.0, 0.0, 0.3]), 1)
    ref = integrate_ray(m, init, IntegratorSpec(dt=1e-3, tol_h=None), 10.0).x[-1]
    errs = []
    for dt in (0.4, 0.2, 0.1):
        x = integrate_ray(m, init, IntegratorSpec(dt=dt, tol_h=None), 10.0).x[-1]
        errs.append(np.linalg.norm(x - ref))
    slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(slopes - 4.0) <= 0.2)


def test_drift_halving_ratio():
    m = linear_model()
    init = launch(m, np.array([0.0, 0.0, 10.0]), np.array([1.0, 0.0, 0.3]), 1)
    d1 = integrate_ray(m, init, IntegratorSpec(dt=0.4, tol_h=None), 10.0).meta["max_h_rel"]
    d2 = integrate_ray(m, init, IntegratorSpec(dt=0.2, tol_h=None), 10.0).meta["max_h_rel"]
    assert 10.0 <= d1 / d2 <= 25.0


def test_off_shell_drift_reported():
    m = Uniform(1.0, box=BIG)
    delta = 1e-3
    ray = RayState(PhasePoint(np.zeros(3), 0.0, np.array([1.0, 0.0, 0.0]), -1.0 + delta), 1)
    traj = integrate_ray(m, ray, IntegratorSpec(dt=0.1, tol_h=None), 1.0)
    assert hamiltonian_drift(traj) >= 0.5 * delta * (1 - 1e-12)
    with pytest.raises(OnShellDriftExceeded):
        integrate_ray(m, ray, IntegratorSpec(dt=0.1, tol_h=1e-6), 1.0)


def test_frozen_medium_keeps_omega():
    m = linear_model()
    traj = integrate_ray(m, launch(m, np.array([0.0, 0.0, 10.0]), np.array([1.0, 0.0, 0.3]), -1),
                         IntegratorSpec(dt=0.01), 10.0)
    npt.assert_array_equal(traj.omega, traj.omega[0])


def test_unsteady_medium_broadens_omega():
    c = ScalarField(1.0, modes=((0.1, (0.0, 0.0, 0.0), 2.0, 0.0),))
    m = Composite(c, box=BIG)
    k = np.array([1.0, 0.0, 0.0])
    traj = integrate_ray(m, launch(m, np.zeros(3), k, 1), IntegratorSpec(dt=0.01), 3.0)
    dw = np.diff(traj.omega)
    # d omega/dt = -b |k| dc/dt with c(t) = 1 + 0.1 sin(2 t)
    tm = 0.5 * (traj.t[1:] + traj.t[:-1])
    expected_sign = -np.sign(np.cos(2 * tm))
    mask = np.abs(np.cos(2 * tm)) > 0.05
    npt.assert_array_equal(np.sign(dw[mask]), expected_sign[mask])
    assert np.ptp(traj.omega) > 0.1


def test_exit_recorded_and_raise():
    m = Uniform(1.0, box=Box(-1.0, 1.0, 0.0, 10.0))
    init = launch(m, np.zeros(3), np.array([1.0, 0.0, 0.0]), 1)
    traj = integrate_ray(m, init, IntegratorSpec(dt=0.1), 5.0)
    assert traj.exited and traj.exit_time == pytest.approx(1.1)
    with pytest.raises(OutOfDomain):
        integrate_ray(m, init, IntegratorSpec(dt=0.1), 5.0, on_exit="raise")


def test_step_limit():
    m = Uniform(1.0, box=BIG)
    with pytest.raises(StepLimitExceeded):
        integrate_ray(m, launch(m, np.zeros(3), np.ones(3), 1), IntegratorSpec(dt=0.1, max_steps=5), 1.0)


def test_zero_wavevector():
    m = Uniform(1.0, box=BIG)
    with pytest.raises(ZeroWavevector):
        ray_rhs(m, RayState(PhasePoint(np.zeros(3), 0.0, np.zeros(3), 0.0), 1))


def test_rk45_agrees_with_rk4():
    m = linear_model()
    init = launch(m, np.array([0.0, 0.0, 10.0]), np.array([1.0, 0.0, 0.3]), 1)
    a = integrate_ray(m, init, IntegratorSpec(dt=0.01), 10.0, [10.0])
    b = integrate_ray(m, init, IntegratorSpec(scheme="rk45", rtol=1e-11, atol=1e-13), 10.0, [10.0])
    npt.assert_allclose(a.x[-1], b.x[-1], rtol=1e-8)


def test_trace_rays_order_independent_of_workers():
    m = linear_model()
    rays = [launch(m, np.array([0.0, 0.0, 10.0 + i]), np.array([1.0, 0.0, 0.1 * i]), 1) for i in range(4)]
    spec = IntegratorSpec(dt=0.05)
    a = trace_rays(m, rays, spec, 5.0, workers=1)
    b = trace_rays(m, rays, spec, 5.0, workers=2)
    for ta, tb in zip(a, b):
        npt.assert_array_equal(ta.x, tb.x)


def test_push_forward_matches_single_rays_bitwise():
    m = linear_model()
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, (5, 3)) + np.array([0.0, 0.0, 20.0])
    k = rng.normal(size=(5, 3))
    br = np.array([1, -1, 1, 1, -1])
    out = push_forward(m, x, k, br, 0.0, 2.0, 0.1, [2.0])
    xs, ks, inside = out[2.0]
    assert inside.all()
    for i in range(5):
        traj = integrate_ray(m, launch(m, x[i], k[i], br[i]), IntegratorSpec(dt=0.1), 2.0, [2.0])
        npt.assert_array_equal(traj.x[-1], xs[i])
        npt.assert_array_equal(traj.k[-1], ks[i])


def test_snell_invariant_in_layer():
    # horizontal slowness k1 is conserved; k1 / |omega| = sin(theta) / c
    m = linear_model()
    traj = integrate_ray(m, launch(m, np.array([0.0, 0.0, 5.0]), np.array([0.6, 0.0, 0.8]), 1),
                         IntegratorSpec(dt=0.05), 20.0)
    state = [evaluate_flow(m, traj.x[i], traj.t[i]) for i in range(len(traj))]
    kn = np.linalg.norm(traj.k, axis=1)
    inv = (traj.k[:, 0] / kn) / np.array([s.c0 for s in state])
    npt.assert_allclose(inv, inv[0], rtol=1e-8)
    assert traj.omega[0] == doppler_frequencies(state[0], traj.k[0])[0]
    assert math.isfinite(traj.meta["max_h_rel"])

"""Built-in invariant checks run by ``acoustic-rte validate --deep``.

Each check is quick (well under a second) and exercises the configured flow
and spectrum where that makes sense, falling back to fixed test models.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .config import RunConfig, parse_config
from .flow import (doppler_frequencies, evaluate_flow, group_velocity, hamiltonian)
from .rays import IntegratorSpec, integrate_ray, launch
from .spectra import SpectralArgument, assemble_correlation_tensor

__all__ = ["CheckResult", "run_invariant_suite"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _points(model, rng, n):
    lo = np.maximum(model.box.lo, -10.0)
    hi = np.minimum(model.box.hi, 10.0)
    x = lo + (hi - lo) * rng.random((n, 3))
    t_hi = min(model.box.t_hi, model.box.t_lo + 10.0)
    t = model.box.t_lo + (t_hi - model.box.t_lo) * rng.random(n)
    return x, t


def _check_dispersion(model, rng):
    x, t = _points(model, rng, 200)
    s = evaluate_flow(model, x, t)
    k = rng.normal(size=(200, 3))
    worst = 0.0
    for om in doppler_frequencies(s, k):
        ck2 = s.c0 ** 2 * np.einsum("ij,ij->i", k, k)
        worst = max(worst, float(np.max(np.abs(hamiltonian(s, k, om)) / ck2)))
    return CheckResult("dispersion shell H(omega_pm) = 0", worst <= 1e-14, f"max rel |H| {worst:.2e}")


def _check_group_velocity(model, rng):
    x, t = _points(model, rng, 50)
    s = evaluate_flow(model, x, t)
    k = rng.normal(size=(50, 3))
    worst = 0.0
    for b in (1, -1):
        vg = group_velocity(s, k, b)
        lam = {1: 1, -1: 0}[b]
        fd = np.empty_like(k)
        h = 1e-5 * np.linalg.norm(k, axis=1)
        for j in range(3):
            e = np.zeros(3)
            e[j] = 1.0
            om_p = doppler_frequencies(s, k + h[:, None] * e)[1 - lam]
            om_m = doppler_frequencies(s, k - h[:, None] * e)[1 - lam]
            fd[:, j] = -(om_p - om_m) / (2 * h)
        worst = max(worst, float(np.max(np.linalg.norm(fd - vg, axis=1) / np.linalg.norm(vg, axis=1))))
    return CheckResult("group velocity = -grad_k omega", worst <= 1e-6, f"max rel error {worst:.2e}")


def _check_ray(cfg: RunConfig, model):
    r = cfg["ray"]
    init = launch(model, np.array(r["x0"]), np.array(r["k0"]), r["branch"], r["t0"])
    spec = IntegratorSpec(scheme=r["scheme"], dt=r["dt"], rtol=r["rtol"], atol=r["atol"], tol_h=None)
    t_end = min(r["t_final"], r["t0"] + 200 * r["dt"])
    traj = integrate_ray(model, init, spec, t_end)
    drift = traj.meta["max_h_rel"]
    return CheckResult("ray on-shell drift", drift <= 1e-8, f"max rel |H| {drift:.2e} over {traj.steps} steps")


def _check_spectrum(spectrum, rng):
    p = rng.normal(size=(300, 3)) * spectrum.peak_scale()
    ups = rng.normal(size=300)
    a = assemble_correlation_tensor(spectrum, SpectralArgument(p, ups))
    b = assemble_correlation_tensor(spectrum, SpectralArgument(-p, -ups))
    even = bool(np.array_equal(a, b))
    scale = max(float(np.max(np.abs(a))), 1e-300)
    min_eig = float(np.min(np.linalg.eigvalsh(a))) / scale
    rv = a[:, 1:, 1:]
    inc = float(np.max(np.abs(np.einsum("ni,nij,nj->n", p, rv, p))
                       / (np.einsum("ni,ni->n", p, p) * scale)))
    ok = even and min_eig >= -1e-12 and (not spectrum.divergence_free or inc <= 1e-14)
    return CheckResult("spectral validity", ok,
                       f"even {even}, min eigenvalue {min_eig:.2e}, p.Rv.p {inc:.2e}")


def _check_backends():
    ids = np.arange(64, dtype=np.uint64)
    results = []
    for name in _kernels.available_backends():
        with _kernels.using_backend(name):
            results.append(_kernels.uniform_pairs(7, ids, np.zeros(64, dtype=np.uint64)))
    same = all(np.array_equal(results[0], r) for r in results[1:])
    return CheckResult("kernel backends agree", same,
                       f"backends {', '.join(_kernels.available_backends())}")


def _check_wigner():
    from .wigner import SampledField, plane_waves, wigner_transform_xt

    eps = 1.0 / 64
    d = np.pi / 128
    f = SampledField.from_function(lambda X, T: plane_waves(X, T, [(1.0, 0.75, -1.25)], eps),
                                   128, 128, d, d, eps)
    w = wigner_transform_xt(f, x_index=[64], t_index=[64])
    k, om, _ = w.peak(0, 0)
    ok = abs(k - 0.75) <= w.dk and abs(om + 1.25) <= w.domega
    return CheckResult("Wigner plane-wave localisation", ok, f"peak at ({k:.4f}, {om:.4f})")


def _check_roundtrip(cfg):
    ok = parse_config(cfg.to_text()) == cfg
    return CheckResult("resolved configuration round-trips", ok, "")


def run_invariant_suite(cfg: RunConfig, seed: int = 0):
    """Run every applicable check and return a list of :class:`CheckResult`."""
    rng = np.random.default_rng(seed)
    model = cfg.flow_model()
    out = [_check_dispersion(model, rng), _check_group_velocity(model, rng), _check_ray(cfg, model)]
    spectrum = cfg.spectrum()
    if spectrum is not None and not spectrum.null:
        out.append(_check_spectrum(spectrum, rng))
    out += [_check_backends(), _check_wigner(), _check_roundtrip(cfg)]
    return out

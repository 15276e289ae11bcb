"""Collision models: loss rates and exact sampling of the outgoing state.

A model provides

* ``rates(x, t, fields, k, b) -> (loss, scattered)``: ``Sigma_b(k)`` and the
  total rate ``\\int sum_b' sigma_{b' b}(p | k) dp`` deposited by a collision
  (equal for conservative kernels);
* ``sample(fields, k, b, ids, blocks, streams) -> (p, b')`` drawn with density
  ``sigma_{b' b}(p | k)`` by rejection against a piecewise-constant envelope.
"""
from __future__ import annotations

import math

import numpy as np

from ..errors import (CorrelatedSpectraUnsupported, MovingMedium, NotFrozen,
                      RejectionBudgetExceeded)
from ..flow import AmbientState, FlowModel
from ..spectra import SpectrumModel
from ..xsec import (CUBE, QuadratureSpec, RateTable, _quadratic, scattered_rate, shell_rates,
                    total_cross_section)

__all__ = ["CollisionModel", "NoScattering", "PrescribedRate", "ShellScattering",
           "SmoothScattering", "collision_model_for", "REJECTION_BUDGET"]

REJECTION_BUDGET = 10_000
FOUR_PI = 4.0 * math.pi


def _norm(k):
    return np.sqrt(np.einsum("ij,ij->i", k, k))


def _frame(khat):
    """Two unit vectors completing ``khat`` (rows) to an orthonormal basis."""
    helper = np.zeros_like(khat)
    use_x = np.abs(khat[:, 0]) < 0.9
    helper[use_x, 0] = 1.0
    helper[~use_x, 1] = 1.0
    e1 = np.cross(khat, helper)
    e1 /= _norm(e1)[:, None]
    e2 = np.cross(khat, e1)
    return e1, e2


def _pick_cells(mass, u):
    """Cell index per row, chosen with probability proportional to ``mass``."""
    cdf = np.cumsum(mass, axis=1)
    target = u * cdf[:, -1]
    idx = (cdf < target[:, None]).sum(axis=1)
    return np.minimum(idx, mass.shape[1] - 1)


def _isotropic(kn, u):
    mu = 2.0 * u[:, 0] - 1.0
    phi = 2.0 * math.pi * u[:, 1]
    s = np.sqrt(np.clip(1.0 - mu * mu, 0.0, None))
    return kn[:, None] * np.stack([s * np.cos(phi), s * np.sin(phi), mu], axis=1)


class CollisionModel:
    conservative = True
    name = "abstract"

    def prepare(self, model: FlowModel, k_range):
        """Build lookup tables for the reachable ``(c0, |k|)`` set; returns the sampled sup rate."""
        return 0.0

    def rates(self, x, t, fields, k, b):
        raise NotImplementedError

    def sample(self, fields, k, b, ids, blocks, streams):
        raise NotImplementedError


class NoScattering(CollisionModel):
    name = "none"

    def rates(self, x, t, fields, k, b):
        z = np.zeros(len(k))
        return z, z

    def sample(self, fields, k, b, ids, blocks, streams):
        return k.copy(), b.copy()


class PrescribedRate(CollisionModel):
    """Loss rate given by ``rate_fn(x, t, k, b)``, isotropic elastic redistribution.

    A modelling aid for heterogeneous or calibrated attenuation; it is not
    derived from a spectrum.
    """

    name = "prescribed"

    def __init__(self, rate_fn, bound=None):
        self.rate_fn = rate_fn
        self.bound = bound

    def prepare(self, model, k_range):
        return 0.0 if self.bound is None else float(self.bound)

    def rates(self, x, t, fields, k, b):
        r = np.broadcast_to(np.asarray(self.rate_fn(x, t, k, b), float), (len(k),)).copy()
        return r, r

    def sample(self, fields, k, b, ids, blocks, streams):
        u = streams.pairs(ids, blocks)
        return _isotropic(_norm(k), u), b.copy()


def _reachable_k(model: FlowModel, k_range):
    # |k| c0 is invariant along rays of a steady quiescent medium; be generous otherwise
    c_lo, c_hi = model.sound_speed_range()
    ratio = c_hi / c_lo
    lo, hi = k_range[0] / ratio, k_range[1] * ratio
    if not model.steady:
        lo, hi = lo / 2.0, hi * 2.0
    return lo, hi


class ShellScattering(CollisionModel):
    """Elastic scattering by frozen perturbations of a quiescent medium.

    ``|p| = |k|`` exactly and the branch is preserved.
    """

    name = "shell"

    def __init__(self, spectrum: SpectrumModel, quadrature: QuadratureSpec | None = None,
                 n_cells: int = 64):
        if not spectrum.frozen:
            raise NotFrozen("shell scattering needs a frozen spectrum")
        self.spectrum = spectrum
        self.quadrature = quadrature or QuadratureSpec()
        self.n_cells = n_cells
        self.conservative = spectrum.divergence_free and not spectrum.correlated
        self.table = None

    def prepare(self, model, k_range):
        if not model.quiescent:
            raise MovingMedium("frozen spectra are supported in quiescent media only")
        if not self.spectrum.isotropic:
            return self._direct_max(model, k_range)
        self.table = RateTable(self.spectrum, _reachable_k(model, k_range),
                               model.sound_speed_range(), self.quadrature)
        return self.table.max_rate

    def _direct_max(self, model, k_range):
        c_lo, c_hi = model.sound_speed_range()
        kn = np.array(_reachable_k(model, k_range))
        dirs = np.array([[0, 0, 1.0], [1.0, 0, 0], [0, 1.0, 0], [1.0, 1.0, 1.0]])
        dirs /= _norm(dirs)[:, None]
        k = (kn[:, None, None] * dirs[None]).reshape(-1, 3)
        best = 0.0
        for c in (c_lo, c_hi):
            loss, _ = shell_rates(np.full(len(k), c), k, self.spectrum, self.quadrature)
            best = max(best, float(loss.max()))
        return best

    def rates(self, x, t, fields, k, b):
        kn = _norm(k)
        c = np.asarray(fields.c, float)
        if self.table is not None:
            ok = self.table.covers(c, kn)
            loss = np.empty(len(k))
            scat = np.empty(len(k))
            if np.any(ok):
                loss[ok] = self.table.loss_rate(c[ok], kn[ok])
                scat[ok] = self.table.scattered_rate(c[ok], kn[ok])
            if not np.all(ok):
                loss[~ok], scat[~ok] = shell_rates(c[~ok], k[~ok], self.spectrum, self.quadrature)
            return loss, scat
        return shell_rates(c, k, self.spectrum, self.quadrature)

    def _cells(self, kn):
        n = self.n_cells
        s = list(2.0 * (np.arange(n + 1) / n) ** 3)
        if math.isfinite(self.spectrum.resolution_length()):
            theta = self.spectrum.peak_scale() / float(kn.max())
            g = 0.5 * theta * theta
            while g > 1e-14 and g < s[1]:
                s.append(g)
                g /= 4.0
        return np.unique(np.array(s))

    def envelope(self, c, kn):
        """Cell edges in ``1 - mu`` and per-particle bounds of the shell kernel."""
        s = self._cells(kn)
        q0 = kn[:, None] * np.sqrt(2.0 * s[None, :-1])
        sp = self.spectrum
        bound = np.zeros(q0.shape)
        if sp.has_sound:
            bound += 0.25 * (c * kn)[:, None] ** 2 * sp.sup_c(q0)
        if sp.has_velocity:
            bound += (kn * kn)[:, None] * sp.sup_v(q0)
        # shell kernels carry the 2 pi of the collapsed frequency line
        bound *= 2.0 * math.pi / CUBE * (1.0 + 1e-9)
        return s, bound

    def sample(self, fields, k, b, ids, blocks, streams):
        if self.spectrum.correlated:
            raise CorrelatedSpectraUnsupported("shell sampling assumes R_cv = 0")
        n = len(k)
        c = np.broadcast_to(np.asarray(fields.c, float), (n,))
        kn = _norm(k)
        khat = k / kn[:, None]
        e1, e2 = _frame(khat)
        s, bound = self.envelope(c, kn)
        mass = bound * np.diff(s)[None, :]
        out = np.empty_like(k)
        todo = np.arange(n)
        for _ in range(REJECTION_BUDGET):
            ua = streams.pairs_at(ids, blocks, todo)
            ub = streams.pairs_at(ids, blocks, todo)
            cell = _pick_cells(mass[todo], ua[:, 0])
            s_lo, s_hi = s[cell], s[cell + 1]
            mu = 1.0 - (s_lo + ua[:, 1] * (s_hi - s_lo))
            phi = 2.0 * math.pi * ub[:, 0]
            sn = np.sqrt(np.clip(1.0 - mu * mu, 0.0, None))
            ph = (mu[:, None] * khat[todo] + (sn * np.cos(phi))[:, None] * e1[todo]
                  + (sn * np.sin(phi))[:, None] * e2[todo])
            ph /= _norm(ph)[:, None]
            p = kn[todo, None] * ph
            om = -(c[todo] * kn[todo])
            value = _quadratic(c[todo], np.zeros(3), k[todo], om, p, om, self.spectrum, False,
                               line=2.0 * math.pi)
            env = bound[todo, cell]
            if np.any(value > env):
                raise RejectionBudgetExceeded("shell envelope below the kernel: mis-sized proposal")
            acc = ub[:, 1] * env < value
            out[todo[acc]] = p[acc]
            todo = todo[~acc]
            if todo.size == 0:
                return out, b.copy()
        raise RejectionBudgetExceeded(f"{todo.size} particles exhausted {REJECTION_BUDGET} trials")


class SmoothScattering(CollisionModel):
    """Scattering by time-dependent perturbations: ``|p|`` and the branch may change."""

    name = "smooth"

    def __init__(self, spectrum: SpectrumModel, quadrature: QuadratureSpec | None = None,
                 n_cells: int = 64):
        if spectrum.frozen:
            raise NotFrozen("frozen spectra use ShellScattering")
        if spectrum.correlated:
            raise CorrelatedSpectraUnsupported("smooth sampling assumes R_cv = 0")
        if spectrum.has_velocity and not spectrum.divergence_free:
            raise CorrelatedSpectraUnsupported(
                "smooth sampling bounds the velocity term through the incompressible projector")
        self.spectrum = spectrum
        self.quadrature = quadrature or QuadratureSpec()
        self.n_cells = n_cells
        self.conservative = spectrum.divergence_free
        self.table = None

    def prepare(self, model, k_range):
        lo, hi = _reachable_k(model, k_range)
        reach = self.spectrum.support_radius()
        lo = max(lo - 4.0 * reach, 0.05 * lo)
        hi = hi + 4.0 * reach
        if model.quiescent and self.spectrum.isotropic:
            self.table = RateTable(self.spectrum, (lo, hi), model.sound_speed_range(), self.quadrature)
            return self.table.max_rate
        self.table = None
        rng = np.random.default_rng(0)
        box = model.box
        best = 0.0
        for kn in np.geomspace(lo, hi, 6):
            x = box.lo + (box.hi - box.lo) * rng.random(3)
            st = model.fields(x, box.t_lo).state()
            kv = kn * rng.normal(size=3)
            kv *= kn / np.linalg.norm(kv)
            for b in (1, -1):
                best = max(best, total_cross_section(st, kv, b, self.spectrum, self.quadrature))
        return best

    def rates(self, x, t, fields, k, b):
        kn = _norm(k)
        c = np.asarray(fields.c, float)
        n = len(k)
        loss = np.empty(n)
        scat = np.empty(n)
        ok = self.table.covers(c, kn) if self.table is not None else np.zeros(n, bool)
        if np.any(ok):
            loss[ok] = self.table.loss_rate(c[ok], kn[ok])
            scat[ok] = self.table.scattered_rate(c[ok], kn[ok])
        for i in np.flatnonzero(~ok):
            st = AmbientState(c[i], fields.v[i], fields.rho[i])
            loss[i] = total_cross_section(st, k[i], int(b[i]), self.spectrum, self.quadrature)
            scat[i] = (loss[i] if self.conservative else
                       scattered_rate(st, k[i], int(b[i]), self.spectrum, self.quadrature))
        return loss, scat

    def _edges(self, kn_min):
        reach = self.spectrum.support_radius()
        first = min(reach / self.n_cells, 0.5 * kn_min)
        return np.unique(np.concatenate([[0.0], first + (reach - first) * np.arange(self.n_cells) /
                                         (self.n_cells - 1)]))

    def envelope(self, c, kn):
        """Bounds of ``sigma_{b' b}(k + q | k)`` on shells ``|q| in [q_j, q_{j+1}]``.

        Returns edges and a ``(N, cells, 2)`` bound for ``b' = b`` and ``b' = -b``.
        """
        q = self._edges(float(kn.min()))
        q0, q1 = q[None, :-1], q[None, 1:]
        kk = kn[:, None]
        sp = self.spectrum
        same = np.zeros(np.broadcast_shapes(q0.shape, kk.shape))
        flip = np.zeros_like(same)
        if sp.has_sound:
            snd = 0.25 * (c[:, None] ** 2) * (kk + q1) * kk * sp.sup_c(q0)
            same = same + snd
            flip = flip + snd
        if sp.has_velocity:
            with np.errstate(divide="ignore"):
                f_q = np.where(q0 > 0.0, 1.0 / np.where(q0 > 0.0, q0, 1.0), np.inf)
                f_p = np.where(q1 < kk, 1.0 / np.where(q1 < kk, kk - q1, 1.0), np.inf)
            fac = np.minimum(f_q, f_p)
            sv = sp.sup_v(q0)
            same = same + 0.25 * sv * (2.0 * kk + q1) ** 2 * kk * fac
            flip = flip + 0.25 * sv * q1 ** 2 * kk * fac
        bound = np.stack([same, flip], axis=-1) / CUBE * (1.0 + 1e-9)
        return q, bound

    def sample(self, fields, k, b, ids, blocks, streams):
        n = len(k)
        c = np.broadcast_to(np.asarray(fields.c, float), (n,))
        v0 = np.broadcast_to(np.asarray(fields.v, float), (n, 3))
        kn = _norm(k)
        q, bound = self.envelope(c, kn)
        vol = (FOUR_PI / 3.0) * np.diff(q ** 3)
        mass = (bound * vol[None, :, None]).reshape(n, -1)
        if not np.all(np.isfinite(mass)):
            raise RejectionBudgetExceeded("unbounded smooth envelope")
        out_k = np.empty_like(k)
        out_b = np.empty_like(b)
        todo = np.arange(n)
        flat_bound = bound.reshape(n, -1)
        for _ in range(REJECTION_BUDGET):
            ua = streams.pairs_at(ids, blocks, todo)
            ud = streams.pairs_at(ids, blocks, todo)
            uc = streams.pairs_at(ids, blocks, todo)
            cell = _pick_cells(mass[todo], ua[:, 0])
            shell, flip = cell // 2, cell % 2
            a3, b3 = q[shell] ** 3, q[shell + 1] ** 3
            r = np.cbrt(a3 + ua[:, 1] * (b3 - a3))
            qv = _isotropic(r, ud)
            p = k[todo] + qv
            pn = _norm(p)
            bo = b[todo]
            bn = np.where(flip == 1, -bo, bo)
            good = pn > 0.0
            safe_p = np.where(good[:, None], p, k[todo])
            vdot_p = np.einsum("ij,ij->i", v0[todo], safe_p)
            vdot_k = np.einsum("ij,ij->i", v0[todo], k[todo])
            om_p = -vdot_p - bn * c[todo] * _norm(safe_p)
            om_k = -vdot_k - bo * c[todo] * kn[todo]
            value = _quadratic(c[todo], v0[todo], safe_p, om_p, k[todo], om_k, self.spectrum, False)
            value = np.where(good, value, 0.0)
            env = flat_bound[todo, cell]
            if np.any(value > env):
                raise RejectionBudgetExceeded("smooth envelope below the kernel: mis-sized proposal")
            acc = uc[:, 0] * env < value
            out_k[todo[acc]] = p[acc]
            out_b[todo[acc]] = bn[acc]
            todo = todo[~acc]
            if todo.size == 0:
                return out_k, out_b
        raise RejectionBudgetExceeded(f"{todo.size} particles exhausted {REJECTION_BUDGET} trials")


def collision_model_for(spectrum: SpectrumModel | None, quadrature: QuadratureSpec | None = None):
    """Shell or smooth model matching the spectrum's frozen flag (``None`` means no scattering)."""
    if spectrum is None or spectrum.null:
        return NoScattering()
    if spectrum.frozen:
        return ShellScattering(spectrum, quadrature)
    return SmoothScattering(spectrum, quadrature)

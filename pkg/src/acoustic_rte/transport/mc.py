"""Monte Carlo solution of the branch-coupled radiative transfer equations.

Particles carry wave action along rays (RK4 on a global step grid shared with
:func:`acoustic_rte.rays.push_forward`) and collide with rate ``Sigma_b``.
Collision times are sampled by null-collision thinning against a constant
majorant: candidates arrive as a Poisson process of rate ``Sigma_maj`` and are
accepted with probability ``Sigma_b / Sigma_maj`` at the phase point reached.
Rejected candidates leave the trajectory untouched.

Particles are processed in fixed-size chunks whose results are merged in
chunk order, so the output is bit-identical for any number of workers.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import MajorantViolated
from ..flow import FlowModel
from ..rays import rk4_step, step_grid
from ..rng import ParticleStreams, child_stream_id
from ..spectra import SpectrumModel
from .collisions import CollisionModel, collision_model_for
from .histogram import HistogramSpec, PhaseSpaceHistogram
from .particles import ActionParticle, ParticleBatch
from .sources import SourceSpec

__all__ = ["TransportConfig", "TransportResult", "Ledger", "run_transport", "total_action",
           "sample_free_flight", "sample_scatter", "prepare_collisions", "SUMMARY_COLUMNS"]

MAJORANT_SLACK = 1e-12


@dataclass
class TransportConfig:
    """Everything that defines a transport run.

    ``collision`` may be given explicitly; otherwise it is derived from
    ``spectrum``.  ``sigma_maj=None`` selects 1.1 times the largest sampled rate.
    """

    model: FlowModel
    source: SourceSpec
    spectrum: SpectrumModel | None = None
    collision: CollisionModel | None = None
    n_particles: int = 10_000
    t_final: float = 1.0
    snapshot_times: tuple = ()
    seed: int = 0
    sigma_maj: float | None = None
    dt: float = 1e-2
    histogram: HistogramSpec = field(default_factory=HistogramSpec)
    chunk_size: int = 32_768
    workers: int = 1
    weight_window: tuple = (0.1, 10.0)
    t0: float = 0.0

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("n_particles must be positive")
        if not self.t_final > self.t0:
            raise ValueError("t_final must exceed the start time")
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if self.sigma_maj is not None and not self.sigma_maj > 0.0:
            raise ValueError("sigma_maj must be positive")
        lo, hi = self.weight_window
        if not 0.0 < lo < 1.0 < hi:
            raise ValueError("weight window must bracket 1")
        if self.collision is None:
            self.collision = collision_model_for(self.spectrum)

    @property
    def times(self):
        snaps = tuple(self.snapshot_times) or (self.t_final,)
        return tuple(sorted(set(float(t) for t in snaps if self.t0 <= t <= self.t_final)))


@dataclass
class Ledger:
    """Action bookkeeping of a run up to one snapshot.

    Action amounts are kept in multiples of ``unit`` (the initial particle
    weight), like the histograms, so equal-weight runs balance exactly.
    """

    unit: float = 1.0
    initial: float = 0.0
    exited: float = 0.0
    roulette: float = 0.0  # net action removed by Russian roulette
    gain: float = 0.0  # net action created by non-conservative weight factors
    real_collisions: int = 0
    null_collisions: int = 0
    splits: int = 0
    max_weight: float = 0.0

    def merge(self, other: "Ledger"):
        if other.unit != self.unit:
            raise ValueError("cannot merge ledgers with different units")
        self.initial += other.initial
        self.exited += other.exited
        self.roulette += other.roulette
        self.gain += other.gain
        self.real_collisions += other.real_collisions
        self.null_collisions += other.null_collisions
        self.splits += other.splits
        self.max_weight = max(self.max_weight, other.max_weight)

    def copy(self):
        return replace(self)

    def book(self, name, weights):
        """Add the action ``weights`` to the account ``name``."""
        setattr(self, name, getattr(self, name) + math.fsum(np.asarray(weights, float) / self.unit))

    def action(self, name) -> float:
        return getattr(self, name) * self.unit


@dataclass
class TransportResult:
    snapshots: list
    ledgers: list
    sigma_maj: float
    config: TransportConfig

    def summary_rows(self):
        rows = []
        for h, led in zip(self.snapshots, self.ledgers):
            plus, minus = h.branch_totals()
            rows.append({
                "time": h.time,
                "total_action": total_action(h, led),
                "histogram_action": h.total(),
                "exited": led.action("exited"),
                "roulette": led.action("roulette"),
                "gain": led.action("gain"),
                "real_collisions": led.real_collisions,
                "null_collisions": led.null_collisions,
                "action_plus": plus,
                "action_minus": minus,
                "particles": int(h.counts.sum()),
                "max_weight": led.max_weight,
                "balance_residual": self._residual(h, led),
            })
        return rows

    @staticmethod
    def _residual(h, led):
        held = math.fsum(h.units)
        return math.fsum([held, led.exited, led.roulette, -led.gain, -led.initial]) * led.unit

    def write_summary(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(SUMMARY_COLUMNS)
            for row in self.summary_rows():
                wr.writerow([repr(row[c]) if isinstance(row[c], float) else row[c]
                             for c in SUMMARY_COLUMNS])


SUMMARY_COLUMNS = ["time", "total_action", "histogram_action", "exited", "roulette", "gain",
                   "real_collisions", "null_collisions", "action_plus", "action_minus",
                   "particles", "max_weight", "balance_residual"]


def total_action(histogram: PhaseSpaceHistogram, ledger: Ledger | None = None) -> float:
    """Action in the histogram plus what left through the boundary."""
    exited = 0.0 if ledger is None else ledger.action("exited")
    return math.fsum([histogram.total(), exited])


def prepare_collisions(config: TransportConfig) -> float:
    """Tabulate rates and return the majorant to use."""
    sampled = config.collision.prepare(config.model, config.source.k_range())
    if config.sigma_maj is not None:
        return float(config.sigma_maj)
    sig = 1.1 * sampled
    return sig if sig > 0.0 else 1.0


def _check_majorant(loss, sigma_maj):
    if loss.size and loss.max() > sigma_maj * (1.0 + MAJORANT_SLACK):
        raise MajorantViolated(float(loss.max()), sigma_maj)


def _collide(cfg, batch, r, xp, fields_r, kp, loss, scat, streams, ledger):
    """Apply real collisions to particles ``r`` at probe states ``xp``, ``kp``."""
    coll = cfg.collision
    blocks = batch.blocks[r]
    knew, bnew = coll.sample(fields_r, kp, batch.b[r], batch.ids[r], blocks, streams)
    batch.blocks[r] = blocks
    batch.x[r] = xp
    batch.k[r] = knew
    batch.b[r] = bnew
    batch.n_scatter[r] += 1
    if not coll.conservative:
        old = batch.w[r]
        new = old * np.where(loss > 0.0, scat / np.where(loss > 0.0, loss, 1.0), 1.0)
        batch.w[r] = new
        ledger.book("gain", new - old)
    ledger.real_collisions += len(r)


def _weight_window(cfg, batch, r, w0, streams, ledger):
    """Russian roulette below and splitting above the weight window."""
    lo, hi = cfg.weight_window
    w = batch.w[r]
    low = r[w < lo * w0]
    if low.size:
        blocks = batch.blocks[low]
        u = streams.pairs_at(batch.ids[low], blocks, np.arange(low.size))
        batch.blocks[low] = blocks
        wl = batch.w[low]
        survive = u[:, 0] * w0 < wl
        removed = np.where(survive, wl - w0, wl)
        ledger.book("roulette", removed)
        batch.w[low] = np.where(survive, w0, 0.0)
    high = r[w > hi * w0]
    extra = []
    for i in high:
        m = int(math.ceil(batch.w[i] / w0))
        share = batch.w[i] / m
        batch.w[i] = share
        for j in range(1, m):
            child = ParticleBatch(batch.x[i:i + 1], batch.k[i:i + 1], batch.b[i:i + 1],
                                  [share], batch.t[i:i + 1],
                                  child_stream_id(batch.ids[i:i + 1], j + int(batch.n_scatter[i]) * 1024))
            child.acc_u[:] = batch.acc_u[i]
            child.t_cand[:] = batch.t_cand[i]
            child.n_scatter[:] = batch.n_scatter[i]
            extra.append(child)
        ledger.splits += m - 1
    return extra


def _run_chunk(args):
    cfg, sigma_maj, start, stop = args
    model = cfg.model
    streams = ParticleStreams(cfg.seed)
    ids = np.arange(start, stop, dtype=np.uint64)
    blocks = np.zeros(len(ids), np.uint64)
    x, k, b = cfg.source.sample(ids, blocks, streams)
    w0 = cfg.source.total_action / cfg.n_particles
    batch = ParticleBatch(x, k, b, np.full(len(ids), w0), np.full(len(ids), cfg.t0), ids, blocks)
    grid, keep = step_grid(cfg.t0, cfg.t_final, cfg.times, cfg.dt)
    times = set(cfg.times)
    ledger = Ledger(unit=w0, max_weight=w0)
    ledger.book("initial", batch.w)
    inside = model.box.contains(batch.x, cfg.t0)
    if not np.all(inside):
        ledger.book("exited", batch.w[~inside])
        batch.keep(inside)
    # first candidate time and its acceptance uniform
    u = streams.pairs(batch.ids, batch.blocks)
    batch.t_cand = cfg.t0 - np.log(u[:, 0]) / sigma_maj
    batch.acc_u = u[:, 1]
    snaps, ledgers = [], []
    if keep[0] and float(grid[0]) in times:
        h = PhaseSpaceHistogram(cfg.histogram, grid[0], w0)
        h.deposit(batch.x, batch.k, batch.b, batch.w)
        snaps.append(h)
        ledgers.append(ledger.copy())
    coll = cfg.collision
    for n in range(len(grid) - 1):
        t_next = grid[n + 1]
        batch.t[:] = grid[n]
        while True:
            sel = np.flatnonzero(batch.t_cand < t_next)
            if sel.size == 0:
                break
            tc = batch.t_cand[sel]
            xp, kp, _ = rk4_step(model, batch.x[sel], batch.t[sel], batch.k[sel], batch.b[sel],
                                 tc - batch.t[sel])
            # probes outside the validity box count as null; the exit is booked at the step end
            ok = model.box.contains(xp, tc)
            fields = model.fields(xp, tc)
            loss, scat = np.zeros(sel.size), np.zeros(sel.size)
            if np.any(ok):
                fo = type(fields)(*(np.asarray(a)[ok] for a in fields))
                loss[ok], scat[ok] = coll.rates(xp[ok], tc[ok], fo, kp[ok], batch.b[sel][ok])
            _check_majorant(loss, sigma_maj)
            real = ok & (batch.acc_u[sel] * sigma_maj < loss)
            ledger.null_collisions += int(sel.size - real.sum())
            r = sel[real]
            if r.size:
                fr = type(fields)(*(np.asarray(a)[real] for a in fields))
                _collide(cfg, batch, r, xp[real], fr, kp[real], loss[real], scat[real], streams, ledger)
                batch.t[r] = tc[real]
                extra = _weight_window(cfg, batch, r, w0, streams, ledger)
            else:
                extra = []
            uu = streams.pairs_at(batch.ids, batch.blocks, sel)
            batch.t_cand[sel] = tc - np.log(uu[:, 0]) / sigma_maj
            batch.acc_u[sel] = uu[:, 1]
            for child in extra:
                uc = streams.pairs(child.ids, child.blocks)
                child.t_cand = child.t - np.log(uc[:, 0]) / sigma_maj
                child.acc_u = uc[:, 1]
                batch.extend(child)
            dead = batch.w <= 0.0
            if np.any(dead):
                batch.keep(~dead)
        batch.x, batch.k, _ = rk4_step(model, batch.x, batch.t, batch.k, batch.b, t_next - batch.t)
        batch.t[:] = t_next
        out = ~model.box.contains(batch.x, t_next)
        if np.any(out):
            ledger.book("exited", batch.w[out])
            batch.keep(~out)
        if len(batch):
            ledger.max_weight = max(ledger.max_weight, float(batch.w.max()))
        if keep[n + 1] and float(t_next) in times:
            h = PhaseSpaceHistogram(cfg.histogram, t_next, w0)
            h.deposit(batch.x, batch.k, batch.b, batch.w)
            snaps.append(h)
            ledgers.append(ledger.copy())
    return snaps, ledgers


def run_transport(config: TransportConfig) -> TransportResult:
    """Run the Monte Carlo solver and return one histogram and ledger per snapshot time."""
    sigma_maj = prepare_collisions(config)
    n = config.n_particles
    bounds = list(range(0, n, config.chunk_size)) + [n]
    jobs = [(config, sigma_maj, a, b) for a, b in zip(bounds[:-1], bounds[1:])]
    if config.workers <= 1 or len(jobs) == 1:
        results = [_run_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_chunk, jobs))
    snaps, ledgers = results[0]
    for s_more, l_more in results[1:]:
        for h, h2 in zip(snaps, s_more):
            h.merge(h2)
        for led, led2 in zip(ledgers, l_more):
            led.merge(led2)
    return TransportResult(snaps, ledgers, sigma_maj, config)


def sample_free_flight(particles, model: FlowModel, collision: CollisionModel, sigma_maj: float,
                       streams: ParticleStreams, ids, blocks, t_max: float, dt: float = 1e-2):
    """Time to the first real collision for each particle, by null-collision thinning.

    ``particles`` is an :class:`ActionParticle` or a sequence of them.  The free
    flight follows the ray (RK4 sub-steps of at most ``dt``).  Particles with no
    real collision before ``t_max`` return ``(t_max - t, False)``.

    Returns ``(flight_time, real)`` arrays.
    """
    if not sigma_maj > 0.0:
        raise ValueError("sigma_maj must be positive")
    if isinstance(particles, ActionParticle):
        particles = [particles]
    x = np.array([p.x for p in particles], float)
    k = np.array([p.k for p in particles], float)
    b = np.array([p.branch for p in particles], float)
    t_start = np.array([p.t for p in particles], float)
    t = t_start.copy()
    n = len(particles)
    flight = np.full(n, math.nan)
    real = np.zeros(n, bool)
    todo = np.arange(n)
    while todo.size:
        u = streams.pairs_at(ids, blocks, todo)
        t_c = np.minimum(t[todo] - np.log(u[:, 0]) / sigma_maj, t_max)
        xs, ks, ts = x[todo], k[todo], t[todo]
        while True:
            h = np.minimum(t_c - ts, dt)
            move = h > 0.0
            if not np.any(move):
                break
            xm, km, _ = rk4_step(model, xs[move], ts[move], ks[move], b[todo][move], h[move])
            xs[move], ks[move] = xm, km
            ts = np.where(move, ts + h, ts)
            ts = np.where(move & (np.abs(ts - t_c) <= 1e-14 * np.maximum(1.0, np.abs(t_c))), t_c, ts)
        x[todo], k[todo], t[todo] = xs, ks, t_c
        fields = model.fields(xs, t_c)
        loss, _ = collision.rates(xs, t_c, fields, ks, b[todo])
        _check_majorant(loss, sigma_maj)
        hit = (u[:, 1] * sigma_maj < loss) & (t_c < t_max)
        horizon = t_c >= t_max
        done = hit | horizon
        idx = todo[done]
        flight[idx] = t_c[done] - t_start[idx]
        real[todo[hit]] = True
        todo = todo[~done]
    return flight, real


def sample_scatter(particles, fields, collision: CollisionModel, streams: ParticleStreams, ids,
                   blocks):
    """Outgoing ``(k, branch)`` of real collisions with density ``sigma_{b' b}(p | k) / Sigma_b(k)``."""
    if isinstance(particles, ActionParticle):
        particles = [particles]
    k = np.array([p.k for p in particles], float)
    b = np.array([p.branch for p in particles], float)
    return collision.sample(fields, k, b, ids, blocks, streams)

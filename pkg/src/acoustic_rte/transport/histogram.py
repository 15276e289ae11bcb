"""Binned estimate of the wave action over phase-space cells."""
from __future__ import annotations

import csv
import math

import numpy as np

from .. import _kernels

__all__ = ["PhaseSpaceHistogram", "HistogramSpec"]


def _edges(e, default):
    e = np.asarray(default if e is None else e, float)
    if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0.0):
        raise ValueError("bin edges must be strictly increasing with at least two entries")
    return e


def _index(values, edges):
    # values outside the edges are clamped into the end bins so no action is lost
    i = np.searchsorted(edges, values, side="right") - 1
    return np.clip(i, 0, len(edges) - 2)


class HistogramSpec:
    """Bin edges for ``x1, x2, x3``, ``mu = k_hat_3``, azimuth ``phi``, ``|k|`` and branch."""

    def __init__(self, x1=None, x2=None, x3=None, mu=None, phi=None, kmag=None):
        big = [-math.inf, math.inf]
        self.x = [_edges(x1, big), _edges(x2, big), _edges(x3, big)]
        self.mu = _edges(mu, [-1.0, 1.0])
        self.phi = _edges(phi, [-math.pi, math.pi])
        self.kmag = _edges(kmag, [0.0, math.inf])

    @property
    def shape(self):
        return tuple(len(e) - 1 for e in self.x) + (len(self.mu) - 1, len(self.phi) - 1,
                                                      len(self.kmag) - 1, 2)

    def flat_index(self, x, k, b):
        kn = np.sqrt(np.einsum("ij,ij->i", k, k))
        mu = k[:, 2] / kn
        phi = np.arctan2(k[:, 1], k[:, 0])
        idx = [_index(x[:, 0], self.x[0]), _index(x[:, 1], self.x[1]), _index(x[:, 2], self.x[2]),
               _index(mu, self.mu), _index(phi, self.phi), _index(kn, self.kmag),
               np.where(np.asarray(b) > 0, 0, 1)]
        return np.ravel_multi_index(idx, self.shape)

    def centers(self):
        def mid(e):
            lo, hi = np.asarray(e[:-1]), np.asarray(e[1:])
            c = np.zeros(lo.shape)
            both = np.isfinite(lo) & np.isfinite(hi)
            c[both] = 0.5 * (lo[both] + hi[both])
            c[~both & np.isfinite(lo)] = lo[~both & np.isfinite(lo)]
            c[~both & np.isfinite(hi)] = hi[~both & np.isfinite(hi)]
            return c
        return [mid(e) for e in self.x] + [mid(self.mu), mid(self.phi), mid(self.kmag)]


class PhaseSpaceHistogram:
    """Accumulated weights and particle counts at one snapshot time.

    Weights are summed in multiples of ``unit`` (the initial particle weight),
    so equal-weight populations accumulate exact integers.
    """

    def __init__(self, spec: HistogramSpec, time: float, unit: float = 1.0):
        self.spec = spec
        self.time = float(time)
        self.unit = float(unit)
        size = int(np.prod(spec.shape))
        self.units = np.zeros(size)
        self.counts = np.zeros(size, dtype=np.int64)

    @property
    def weights(self):
        return self.units * self.unit

    def deposit(self, x, k, b, w):
        if len(w) == 0:
            return
        idx = self.spec.flat_index(x, k, b)
        self.units += _kernels.accumulate(idx, np.asarray(w, float) / self.unit, self.units.size)
        self.counts += np.bincount(idx, minlength=self.counts.size)

    def merge(self, other: "PhaseSpaceHistogram"):
        if (other.units.shape != self.units.shape or other.time != self.time
                or other.unit != self.unit):
            raise ValueError("cannot merge histograms with different layouts, times or units")
        self.units += other.units
        self.counts += other.counts

    def array(self):
        return self.weights.reshape(self.spec.shape)

    def total(self) -> float:
        return math.fsum(self.weights)

    def branch_totals(self):
        w = self.array()
        return math.fsum(w[..., 0].ravel()), math.fsum(w[..., 1].ravel())

    def to_csv(self, path):
        """Rows for every occupied bin: indices, bin centres, weight and count."""
        centers = self.spec.centers()
        shape = self.spec.shape
        nz = np.flatnonzero(self.counts)
        weights = self.weights
        multi = np.unravel_index(nz, shape)
        names = ["x1", "x2", "x3", "mu", "phi", "kmag"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["time"] + [f"i_{n}" for n in names] + ["branch"] + names + ["weight", "count"])
            for j, flat in enumerate(nz):
                ii = [int(m[j]) for m in multi]
                row = [repr(self.time)] + ii[:6] + ["+" if ii[6] == 0 else "-"]
                row += [repr(float(centers[a][ii[a]])) for a in range(6)]
                row += [repr(float(weights[flat])), int(self.counts[flat])]
                wr.writerow(row)

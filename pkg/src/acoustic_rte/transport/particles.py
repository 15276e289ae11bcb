"""Monte Carlo carriers of wave action."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ZeroWavevector
from ..flow import AmbientState, branch_sign, doppler_frequencies

__all__ = ["ActionParticle", "ParticleBatch"]


@dataclass(frozen=True)
class ActionParticle:
    """One particle.  Its frequency is never stored; :meth:`omega` recomputes it on the shell."""

    x: np.ndarray
    k: np.ndarray
    branch: int
    weight: float
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, float))
        object.__setattr__(self, "k", np.asarray(self.k, float))
        object.__setattr__(self, "branch", branch_sign(self.branch))
        if not np.linalg.norm(self.k) > 0.0:
            raise ZeroWavevector("particles carry k != 0")
        if self.weight < 0.0:
            raise ValueError("particle weight must be non-negative")

    def omega(self, state: AmbientState) -> float:
        wp, wm = doppler_frequencies(state, self.k)
        return float(wp if self.branch > 0 else wm)


class ParticleBatch:
    """Structure-of-arrays population of particles with their random-stream state."""

    __slots__ = ("x", "k", "b", "w", "t", "ids", "blocks", "n_scatter", "acc_u", "t_cand")

    def __init__(self, x, k, b, w, t, ids, blocks=None):
        self.x = np.asarray(x, float)
        self.k = np.asarray(k, float)
        self.b = np.asarray(b, float)
        self.w = np.asarray(w, float)
        self.t = np.asarray(t, float)
        self.ids = np.asarray(ids, np.uint64)
        n = len(self.ids)
        self.blocks = np.zeros(n, np.uint64) if blocks is None else np.asarray(blocks, np.uint64)
        self.n_scatter = np.zeros(n, np.int64)
        self.acc_u = np.zeros(n)
        self.t_cand = np.zeros(n)

    def __len__(self):
        return len(self.ids)

    def keep(self, mask):
        for name in self.__slots__:
            setattr(self, name, getattr(self, name)[mask])

    def extend(self, other: "ParticleBatch"):
        for name in self.__slots__:
            setattr(self, name, np.concatenate([getattr(self, name), getattr(other, name)]))

    def particle(self, i) -> ActionParticle:
        return ActionParticle(self.x[i], self.k[i], int(self.b[i]), float(self.w[i]), float(self.t[i]))

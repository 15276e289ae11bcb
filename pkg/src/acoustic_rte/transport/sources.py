"""Initial distributions of wave action."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..flow import branch_sign

__all__ = ["SourceSpec", "PointBeam", "GaussianBeam", "IsotropicPoint"]


def _vec(v):
    return np.broadcast_to(np.asarray(v, float), (3,)).copy()


class SourceSpec:
    """Base class.  ``sample`` returns ``(x, k, branch)`` for the given particle streams."""

    total_action = 1.0

    def _check(self):
        if not self.total_action > 0.0:
            raise ValueError("source total action must be positive")

    def sample(self, ids, blocks, streams):
        raise NotImplementedError

    def k_range(self):
        """Bounds of the source's ``|k|`` (used to size rate tables)."""
        raise NotImplementedError


@dataclass(frozen=True)
class PointBeam(SourceSpec):
    x0: np.ndarray
    k0: np.ndarray
    branch: int = 1
    total_action: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "x0", _vec(self.x0))
        object.__setattr__(self, "k0", _vec(self.k0))
        object.__setattr__(self, "branch", branch_sign(self.branch))
        if not np.linalg.norm(self.k0) > 0.0:
            raise ValueError("source wavevector must be non-zero")
        self._check()

    def sample(self, ids, blocks, streams):
        n = len(ids)
        return (np.tile(self.x0, (n, 1)), np.tile(self.k0, (n, 1)), np.full(n, float(self.branch)))

    def k_range(self):
        kn = float(np.linalg.norm(self.k0))
        return kn, kn


def _normals(ids, blocks, streams, count):
    """``count`` independent standard normals per particle (Box-Muller)."""
    cols = []
    for _ in range((count + 1) // 2):
        u = streams.pairs(ids, blocks)
        r = np.sqrt(-2.0 * np.log(u[:, 0]))
        cols += [r * np.cos(2.0 * math.pi * u[:, 1]), r * np.sin(2.0 * math.pi * u[:, 1])]
    return np.stack(cols[:count], axis=1)


@dataclass(frozen=True)
class GaussianBeam(SourceSpec):
    """Independent Gaussian spreads in position and wavevector about ``(x0, k0)``."""

    x0: np.ndarray
    k0: np.ndarray
    x_spread: np.ndarray = 0.0
    k_spread: np.ndarray = 0.0
    branch: int = 1
    total_action: float = 1.0

    def __post_init__(self):
        for name in ("x0", "k0", "x_spread", "k_spread"):
            object.__setattr__(self, name, _vec(getattr(self, name)))
        object.__setattr__(self, "branch", branch_sign(self.branch))
        if np.any(self.x_spread < 0.0) or np.any(self.k_spread < 0.0):
            raise ValueError("spreads must be non-negative")
        self._check()

    def sample(self, ids, blocks, streams):
        z = _normals(ids, blocks, streams, 6)
        x = self.x0 + z[:, :3] * self.x_spread
        k = self.k0 + z[:, 3:] * self.k_spread
        return x, k, np.full(len(ids), float(self.branch))

    def k_range(self):
        kn = float(np.linalg.norm(self.k0))
        s = 6.0 * float(np.linalg.norm(self.k_spread))
        return max(kn - s, 1e-3 * kn), kn + s


@dataclass(frozen=True)
class IsotropicPoint(SourceSpec):
    """Point source radiating uniformly in direction at fixed ``|k|``."""

    x0: np.ndarray
    k_mag: float
    branch: int = 1
    total_action: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "x0", _vec(self.x0))
        object.__setattr__(self, "branch", branch_sign(self.branch))
        if not self.k_mag > 0.0:
            raise ValueError("k_mag must be positive")
        self._check()

    def sample(self, ids, blocks, streams):
        u = streams.pairs(ids, blocks)
        mu = 2.0 * u[:, 0] - 1.0
        phi = 2.0 * math.pi * u[:, 1]
        s = np.sqrt(np.clip(1.0 - mu * mu, 0.0, None))
        k = self.k_mag * np.stack([s * np.cos(phi), s * np.sin(phi), mu], axis=1)
        n = len(ids)
        return np.tile(self.x0, (n, 1)), k, np.full(n, float(self.branch))

    def k_range(self):
        return float(self.k_mag), float(self.k_mag)

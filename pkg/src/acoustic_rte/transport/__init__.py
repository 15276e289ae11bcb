"""Monte Carlo radiative transfer of wave action."""
from .collisions import (CollisionModel, NoScattering, PrescribedRate, ShellScattering,
                         SmoothScattering, collision_model_for)
from .histogram import HistogramSpec, PhaseSpaceHistogram
from .mc import (Ledger, TransportConfig, TransportResult, run_transport, sample_free_flight,
                 sample_scatter, total_action)
from .particles import ActionParticle, ParticleBatch
from .sources import GaussianBeam, IsotropicPoint, PointBeam, SourceSpec

__all__ = [
    "ActionParticle", "ParticleBatch", "SourceSpec", "PointBeam", "GaussianBeam", "IsotropicPoint",
    "HistogramSpec", "PhaseSpaceHistogram", "CollisionModel", "NoScattering", "PrescribedRate",
    "ShellScattering", "SmoothScattering", "collision_model_for", "TransportConfig",
    "TransportResult", "Ledger", "run_transport", "sample_free_flight", "sample_scatter",
    "total_action",
]

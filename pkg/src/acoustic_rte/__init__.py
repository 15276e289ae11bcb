"""Kinetic simulation of high-frequency acoustic wave action in random moving media.

Submodules
----------
flow        ambient flow models, Doppler frequencies, group velocity, Hamiltonian
spectra     turbulence power spectra and the correlation tensor
xsec        scattering kernels, total cross-sections, rate tables
rays        Hamiltonian ray integration and Liouville push-forward
transport   Monte Carlo radiative transfer with null collisions
wigner      discrete Wigner transforms of synthetic 1+1 dimensional fields
config, cli run configuration and the ``acoustic-rte`` command
"""
from . import errors, flow, rays, spectra, transport, wigner, xsec
from ._kernels import available_backends, backend, set_backend
from .config import RunConfig, load_config, parse_config
from .errors import *  # noqa: F401,F403

__version__ = "0.1.0"

__all__ = ["errors", "flow", "rays", "spectra", "transport", "wigner", "xsec",
           "RunConfig", "parse_config", "load_config", "backend", "set_backend",
           "available_backends", "__version__"]

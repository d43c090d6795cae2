"""Seeded simulation of polarization and dispersion decoherence in fiber links.

Submodules
----------
polarization_core
    Jones vectors, Poincare vectors, trunk propagators, Faraday mirror.
spectral_state
    Broadband photons sampled on a frequency grid; degree of polarization.
fiber_model
    Random concatenated-trunk fibers, round trips, DGD eigenanalysis.
pmd_interferometer
    Interferogram synthesis and second-moment PMD estimation.
franson_sim
    Franson two-photon interference with chromatic dispersion.
cli
    ``fiberdeco`` experiment runner.
"""
from .errors import ConvergenceWarning, DomainError, NumericalError

__version__ = "0.1.0"

__all__ = ["ConvergenceWarning", "DomainError", "NumericalError", "__version__"]

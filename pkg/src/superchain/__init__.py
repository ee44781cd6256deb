"""Tight-binding wire with an asynchronized central qubit pair.

Closed spectra, open-system resonances under a non-Hermitian effective
Hamiltonian, survival dynamics and dephasing via a master equation.
"""

from .model import ChainSpec, EffectiveHamiltonian, SpecError, build_closed_hamiltonian, build_effective_hamiltonian

__version__ = "0.1.0"

__all__ = [
    "ChainSpec",
    "EffectiveHamiltonian",
    "SpecError",
    "build_closed_hamiltonian",
    "build_effective_hamiltonian",
    "__version__",
]

"""Radical-pair spin dynamics with singlet-triplet coherence and quantum-trajectory Monte Carlo."""

from .coherence import CoherenceContext, coherence_C, max_unitary_coherence, pcoh_new, pcoh_old
from .dynamics import EvolutionResult, Rates, Theory, propagate
from .montecarlo import EnsembleConfig, EnsembleResult, InitialStatePolicy, run_ensemble, run_trajectory
from .spin_core import HamiltonianSpec, NuclearSpinSpec, Site, SpinSystem, build_hamiltonian, one_nucleus_system

__version__ = "0.1.0"

__all__ = [
    "CoherenceContext", "coherence_C", "max_unitary_coherence", "pcoh_new", "pcoh_old",
    "EvolutionResult", "Rates", "Theory", "propagate",
    "EnsembleConfig", "EnsembleResult", "InitialStatePolicy", "run_ensemble", "run_trajectory",
    "HamiltonianSpec", "NuclearSpinSpec", "Site", "SpinSystem", "build_hamiltonian", "one_nucleus_system",
]

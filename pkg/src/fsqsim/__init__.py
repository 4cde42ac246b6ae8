"""Desk-scale simulator of a strontium-88 fine-structure-qubit tweezer array:
gate benchmarking (CRB, SSB, Bell states), erasure-conversion readout
statistics, Rydberg decay rate equations, laser-noise and ionization error
budgets, and atom-array assembly and equalization."""

from ._kernels import BACKEND as KERNEL_BACKEND
from .czopt import default_profile, optimize_cz
from .levels import LevelScheme
from .lindblad import CollapseOperator, ModulatedDrive, evolve_lindblad
from .channels import Superoperator, channel_superoperator, process_fidelity
from .noise import NoiseConfig
from .rydberg import CZPulseProfile, RydbergDrive, time_optimal_cz
from .states import QuantumState, embed_local, measure_populations

__all__ = [
    "KERNEL_BACKEND",
    "LevelScheme",
    "QuantumState",
    "CollapseOperator",
    "ModulatedDrive",
    "Superoperator",
    "NoiseConfig",
    "RydbergDrive",
    "CZPulseProfile",
    "evolve_lindblad",
    "channel_superoperator",
    "process_fidelity",
    "embed_local",
    "measure_populations",
    "time_optimal_cz",
    "optimize_cz",
    "default_profile",
]
__version__ = "0.1.0"

"""heatchain: open harmonic chain with momentum-exchange noise.

Exact finite-n stationary and time-dependent moments, stochastic simulation
with exact-in-law noise substeps, the macroscopic coupled diffusion system,
and a verification suite cross-checking the three engines.
"""

__version__ = "0.1.0"

from .chain import (ChainParams, ConstantTension, RampTension, SinusoidTension,
                    boundary_currents, bulk_current, site_energy, total_energy)
from .moments import (DecompositionReport, MomentSolution, ProfileTable,
                      energy_decomposition, equipartition_defect,
                      evolve_moments, profile_from_moments,
                      solve_stationary_mean, solve_stationary_second_moments,
                      stationary_solution)
from .operators import OperatorSet, assemble_operators
from .pde import (MacroFields, StationaryProfiles, solve_energy, solve_macro,
                  solve_stretch, stationary_profiles, thermal_split)
from .sim import (EstimateTable, InitialEnsemble, SimConfig, run_ness,
                  run_transient, step_exchange, step_hamiltonian,
                  step_thermostat)
from .verify import VerificationReport, run_suite

__all__ = [
    "ChainParams", "ConstantTension", "RampTension", "SinusoidTension",
    "site_energy", "total_energy", "bulk_current", "boundary_currents",
    "OperatorSet", "assemble_operators",
    "MomentSolution", "ProfileTable", "DecompositionReport",
    "solve_stationary_mean", "solve_stationary_second_moments",
    "stationary_solution", "evolve_moments", "profile_from_moments",
    "energy_decomposition", "equipartition_defect",
    "MacroFields", "StationaryProfiles", "solve_stretch", "solve_energy",
    "solve_macro", "thermal_split", "stationary_profiles",
    "SimConfig", "EstimateTable", "InitialEnsemble", "run_ness",
    "run_transient", "step_hamiltonian", "step_exchange", "step_thermostat",
    "VerificationReport", "run_suite",
    "__version__",
]

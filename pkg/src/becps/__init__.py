"""Phase-space simulations of thermal Bose-Einstein condensates.

Builds Bogoliubov initial ensembles (truncated Wigner or positive-P)
over a periodic lattice, evolves them with split-step integrators, and
reduces them to ordering-corrected observables.
"""

__version__ = "0.1.0"

from . import (bogoliubov, cli, dynamics, errors, lattice, meanfield,
               observables, sampler, thermal)
from .bogoliubov import (ModeSet, homogeneous_modes, nonlinear_mu2,
                         solve_bdg, solve_zero_mode)
from .dynamics import (EnsembleSeries, EvolutionPlan, QuenchSpec, gpe_energy,
                       run_ensemble, step_positive_p, step_wigner)
from .errors import ConfigError, EscapeThresholdError, SolverError
from .lattice import (Lattice, build_lattice, field_from_flat,
                      mode_amplitudes_flat, single_mode_lattice, to_modes,
                      to_position)
from .meanfield import (CondensateSolution, SystemParams, kinetic_energies,
                        potential_grid, solve_number_balance,
                        solve_stationary, uniform_condensate)
from .observables import (ObservableSeries, OccupationSpectrum,
                          QuadratureVariances, g2_zero, jackknife,
                          mode_occupations, number_statistics,
                          quadrature_variances)
from .sampler import (FieldSample, TrajectoryEnsemble, sample_ensemble,
                      sample_positive_p, sample_wigner, trajectory_rng)
from .thermal import (CorrelationMatrix, ThermalEnsembleSpec, ZeroModeState,
                      correlation_matrix, normal_order, occupations,
                      squeezed, thermal_state, vacuum)

__all__ = [
    "__version__",
    "bogoliubov", "cli", "dynamics", "errors", "lattice", "meanfield",
    "observables", "sampler", "thermal",
    "ModeSet", "homogeneous_modes", "nonlinear_mu2", "solve_bdg",
    "solve_zero_mode",
    "EnsembleSeries", "EvolutionPlan", "QuenchSpec", "gpe_energy",
    "run_ensemble", "step_positive_p", "step_wigner",
    "ConfigError", "EscapeThresholdError", "SolverError",
    "Lattice", "build_lattice", "field_from_flat", "mode_amplitudes_flat",
    "single_mode_lattice", "to_modes", "to_position",
    "CondensateSolution", "SystemParams", "kinetic_energies",
    "potential_grid", "solve_number_balance", "solve_stationary",
    "uniform_condensate",
    "ObservableSeries", "OccupationSpectrum", "QuadratureVariances",
    "g2_zero", "jackknife", "mode_occupations", "number_statistics",
    "quadrature_variances",
    "FieldSample", "TrajectoryEnsemble", "sample_ensemble",
    "sample_positive_p", "sample_wigner", "trajectory_rng",
    "CorrelationMatrix", "ThermalEnsembleSpec", "ZeroModeState",
    "correlation_matrix", "normal_order", "occupations", "squeezed",
    "thermal_state", "vacuum",
]

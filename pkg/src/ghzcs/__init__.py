"""Compressed-sensing fidelity estimation for flag-checked GHZ states."""

__version__ = "0.1.0"

from .circuit import (Circuit, Gate, GateCounts, GateKind, PrepTree, attach_flag_checks,
                      attach_parity_measurement, attach_z_measurement, build_ghz_tree,
                      count_gates, insert_dd)
from .coverage import brute_force_optimal, coverage_set, greedy_flag_placement, lca
from .fidelity import FidelityReport, bootstrap_ci, certify_gme, estimate_fidelity
from .mitigate import ConfusionModel, rem_parity, rem_population
from .recover import (RecoveryResult, build_measurement_matrix, detect_support,
                      fourier_grid_estimate, lasso_fit, ols_refine, recover_coherence,
                      sample_angles)
from .simulate import (CountsTable, NoiseModel, ParitySample, emulate_fast_parity,
                       parity_expectation_from_counts, population_from_counts,
                       postselect_flags, run_statevector_trajectories)

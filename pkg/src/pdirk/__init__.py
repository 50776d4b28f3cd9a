"""Perturbed DIRK time integration with linearized implicit stages."""

from .harness import (ConvergenceRecord, ConvergenceStudy, ReferenceKind,
                      default_dts, emit_results, run_convergence,
                      run_stability_sweep)
from .integrator import (AnchorPolicy, BlowUpError, IntegrationError,
                         StageSolveError, integrate, perturbed_dirk_step,
                         reference_solution, resolved_newton_baseline)
from .problems import (EXACT_STRATEGY, AffineOperator, ProblemInstance,
                       burgers_problem, porous_medium_problem,
                       problem_by_name, scalar_contractive_problem,
                       shallow_water_problem, tau_consistency_probe)
from .spectral import DiffMatrices, PeriodicGrid, build_diff_matrices
from .tableau import (ConsistencyClass, PerturbedTableau, StabilityReport,
                      Tableau, abscissae, classify_orders,
                      method_condition_residuals,
                      perturbation_condition_residuals, registry_lookup,
                      registry_names, stability_report, tableau_from_json,
                      tableau_to_json)

__all__ = [
    "AffineOperator",
    "AnchorPolicy",
    "BlowUpError",
    "ConsistencyClass",
    "ConvergenceRecord",
    "ConvergenceStudy",
    "DiffMatrices",
    "EXACT_STRATEGY",
    "IntegrationError",
    "PerturbedTableau",
    "PeriodicGrid",
    "ProblemInstance",
    "ReferenceKind",
    "StabilityReport",
    "StageSolveError",
    "Tableau",
    "abscissae",
    "build_diff_matrices",
    "burgers_problem",
    "classify_orders",
    "default_dts",
    "emit_results",
    "integrate",
    "method_condition_residuals",
    "perturbation_condition_residuals",
    "perturbed_dirk_step",
    "porous_medium_problem",
    "problem_by_name",
    "reference_solution",
    "registry_lookup",
    "registry_names",
    "resolved_newton_baseline",
    "run_convergence",
    "run_stability_sweep",
    "scalar_contractive_problem",
    "shallow_water_problem",
    "stability_report",
    "tableau_from_json",
    "tableau_to_json",
    "tau_consistency_probe",
]

__version__ = "0.1.0"

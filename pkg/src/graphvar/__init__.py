"""Variance estimation for graph-structured signals.

Homoscedastic estimation via differences along a randomized depth-first
visit order, heteroscedastic estimation via total-variation regularized
fits of the signal and its square, with certified fused-lasso solvers
and a Monte-Carlo harness for the reference experiments.
"""

from .estimators import (GraphFusedLasso, HeteroscedasticVariance,
                         HomoscedasticVariance)
from .graphs import (DfsOrder, Graph, build_chain, build_grid,
                     build_knn_graph, dfs_order, incidence_adjoint,
                     incidence_apply, level_components, total_variation)
from .montecarlo import (EstimatorConfig, McReport, derive_seed, rate_slope,
                         run_monte_carlo)
from .scenarios import (ScenarioSpec, chain_threepiece_spec,
                        generate_scenario, sample_errors)
from .solvers import (FusedLassoFit, SolverOptions, duality_gap, fused_fit,
                      fused_lasso_chain, fused_lasso_graph,
                      lambda_max_certificate, objective)
from .validation import InputFormatError, SolverError
from .variance import (DEFAULT_LAMBDA_GRID, HeteroscedasticFit,
                       HomoscedasticEstimate, ModelSelectionTrace, bic_select,
                       degrees_of_freedom, heteroscedastic_variance,
                       heteroscedastic_variance_auto, homoscedastic_variance,
                       risk_estimate, robust_bic_select)

__version__ = "0.1.0"

__all__ = [
    "Graph", "DfsOrder", "build_chain", "build_grid", "build_knn_graph",
    "incidence_apply", "incidence_adjoint", "total_variation", "dfs_order",
    "level_components",
    "FusedLassoFit", "SolverOptions", "fused_lasso_chain", "fused_lasso_graph",
    "duality_gap", "lambda_max_certificate", "fused_fit", "objective",
    "HomoscedasticEstimate", "HeteroscedasticFit", "ModelSelectionTrace",
    "homoscedastic_variance", "heteroscedastic_variance",
    "heteroscedastic_variance_auto", "degrees_of_freedom", "risk_estimate",
    "bic_select", "robust_bic_select", "DEFAULT_LAMBDA_GRID",
    "ScenarioSpec", "generate_scenario", "sample_errors",
    "chain_threepiece_spec",
    "EstimatorConfig", "McReport", "run_monte_carlo", "rate_slope",
    "derive_seed",
    "GraphFusedLasso", "HomoscedasticVariance", "HeteroscedasticVariance",
    "InputFormatError", "SolverError",
    "__version__",
]

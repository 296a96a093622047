"""Global sensitivity analysis with single-sample rank estimators and
Pick-Freeze designs.

Highlights: all first-order Sobol' and Cramer-von-Mises indices from one
i.i.d. sample (no special design), classical Pick-Freeze estimators for
comparison, closed-form and Monte-Carlo limiting variances with normal
confidence intervals, and a replication harness with CSV/SVG reports.
"""

__version__ = "0.1.0"

from .asymptotics import (MomentSet, SigmaComponents, approx_sigma_from_sample,
                          confidence_interval, cov_yy1_yyi, linear_moments,
                          linear_sigma_components, normal_quantile, sigma_plugin,
                          v_eff, v_pf, v_rank)
from .estimators import RankSensitivityAnalysis, rank_cvm_scores, rank_sobol_scores
from .exceptions import DegenerateDataError, UsageError
from .experiments import (ConvergenceReport, ExperimentConfig, MseReport,
                          VarianceTable, emit_csv, emit_svg, run_convergence,
                          run_dimension, run_mse, run_variance_compare)
from .models import (CountingModel, DistributionSpec, GFunctionParams,
                     LinearModelParams, ModelSpec, from_quantile, gfunction_eval,
                     gfunction_exact_sobol, linear_exact_sobol, make_gfunction,
                     make_linear, make_model, register_model, transform_input,
                     uniform, uniform01)
from .pickfreeze import (EstimateResult, cvm_pickfreeze, cvm_value,
                         pf_identity_check, sn_value, sobol_sn, sobol_tn, tn_value)
from .ranks import (NeighborMap, RankData, chatterjee_xi, chi_general,
                    compute_ranks, neighbor_map, rank_cvm_all, rank_cvm_indices,
                    rank_sobol, rank_sobol_all, rank_sobol_indices)
from .sampling import (IidDesign, PickFreezeDesign, PickFreezePanel, RngStream,
                       TripleDesign, budget_split, derive_stream, sample_iid,
                       sample_pickfreeze, sample_pickfreeze_panel, sample_triple,
                       uniform_open)

__all__ = [
    "MomentSet", "SigmaComponents", "approx_sigma_from_sample",
    "confidence_interval", "cov_yy1_yyi", "linear_moments",
    "linear_sigma_components", "normal_quantile", "sigma_plugin",
    "v_eff", "v_pf", "v_rank",
    "RankSensitivityAnalysis", "rank_cvm_scores", "rank_sobol_scores",
    "DegenerateDataError", "UsageError",
    "ConvergenceReport", "ExperimentConfig", "MseReport", "VarianceTable",
    "emit_csv", "emit_svg", "run_convergence", "run_dimension", "run_mse",
    "run_variance_compare",
    "CountingModel", "DistributionSpec", "GFunctionParams", "LinearModelParams",
    "ModelSpec", "from_quantile", "gfunction_eval", "gfunction_exact_sobol",
    "linear_exact_sobol", "make_gfunction", "make_linear", "make_model",
    "register_model", "transform_input", "uniform", "uniform01",
    "EstimateResult", "cvm_pickfreeze", "cvm_value", "pf_identity_check",
    "sn_value", "sobol_sn", "sobol_tn", "tn_value",
    "NeighborMap", "RankData", "chatterjee_xi", "chi_general", "compute_ranks",
    "neighbor_map", "rank_cvm_all", "rank_cvm_indices", "rank_sobol",
    "rank_sobol_all", "rank_sobol_indices",
    "IidDesign", "PickFreezeDesign", "PickFreezePanel", "RngStream",
    "TripleDesign", "budget_split", "derive_stream", "sample_iid",
    "sample_pickfreeze", "sample_pickfreeze_panel", "sample_triple",
    "uniform_open",
]

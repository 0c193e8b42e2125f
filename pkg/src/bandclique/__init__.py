"""Coherence-based band selection and kernel-based nonlinear unmixing.

Reduces the band count of hyperspectral data before kernel unmixing by
bounding the pairwise coherence of the selected bands' kernel functions.
At a fixed threshold the largest admissible band set is an exact maximum
clique of the coherence graph; a greedy screen and a kernel k-means
clustering baseline are provided for comparison. Unmixing combines a
linear endmember trend with a kernel residual, balanced by a scalar
found via one-dimensional search.
"""

from .exceptions import (
    BandCliqueError,
    BudgetExceededError,
    ConvergenceError,
    DegenerateSolutionError,
    DimacsParseError,
    InputError,
    ParameterError,
    SolverError,
)
from .kernels import GramMatrix, coherence, gaussian_kernel, gram_matrix, gram_power
from .params import (
    ParamSetting,
    auto_params,
    coherence_threshold,
    mean_offdiagonal,
    solve_bandwidth,
)
from .cliques import (
    Clique,
    CliqueGraph,
    build_adjacency,
    dimacs_read,
    dimacs_write,
    maximum_clique,
    maximum_clique_bruteforce,
)
from .selection import (
    BandDictionary,
    ClusterState,
    CoherenceBandSelector,
    KernelKMeansBandSelector,
    ccbs,
    clique_members,
    cluster_representatives,
    gcbs,
    gkkm_select,
    greedy_members,
    kkm_cluster,
)
from .mixing import (
    SyntheticScene,
    add_noise,
    gbm,
    lmm,
    pnmm,
    random_endmembers,
    sample_simplex,
    synth_scene,
)
from .unmixing import (
    DualSolution,
    LssvrResult,
    SceneUnmixResult,
    SkhypeModel,
    SKHypeUnmixer,
    UnmixResult,
    dual_gradient,
    dual_objective,
    lssvr_fit,
    minimize_Ju,
    reconstruct_pixels,
    skhype_dual_fixed_u,
    skhype_recover,
    unmix_scene,
)
from .harness import (
    ExperimentConfig,
    ResultRow,
    StrategySpec,
    parse_config,
    reconstruction_error,
    rmse_abundance,
    rmse_vs_reference,
    run_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "BandCliqueError",
    "BandDictionary",
    "BudgetExceededError",
    "Clique",
    "CliqueGraph",
    "ClusterState",
    "CoherenceBandSelector",
    "ConvergenceError",
    "DegenerateSolutionError",
    "DimacsParseError",
    "DualSolution",
    "ExperimentConfig",
    "GramMatrix",
    "InputError",
    "KernelKMeansBandSelector",
    "LssvrResult",
    "ParamSetting",
    "ParameterError",
    "ResultRow",
    "SceneUnmixResult",
    "SkhypeModel",
    "SKHypeUnmixer",
    "SolverError",
    "StrategySpec",
    "SyntheticScene",
    "UnmixResult",
    "add_noise",
    "auto_params",
    "build_adjacency",
    "ccbs",
    "clique_members",
    "cluster_representatives",
    "coherence",
    "coherence_threshold",
    "dimacs_read",
    "dimacs_write",
    "dual_gradient",
    "dual_objective",
    "gaussian_kernel",
    "gbm",
    "gcbs",
    "gkkm_select",
    "gram_matrix",
    "greedy_members",
    "gram_power",
    "kkm_cluster",
    "lmm",
    "lssvr_fit",
    "maximum_clique",
    "maximum_clique_bruteforce",
    "mean_offdiagonal",
    "minimize_Ju",
    "parse_config",
    "pnmm",
    "random_endmembers",
    "reconstruct_pixels",
    "reconstruction_error",
    "rmse_abundance",
    "rmse_vs_reference",
    "run_experiment",
    "sample_simplex",
    "skhype_dual_fixed_u",
    "skhype_recover",
    "solve_bandwidth",
    "synth_scene",
    "unmix_scene",
]

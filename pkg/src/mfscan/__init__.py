"""mfscan: spatial scan statistics for multivariate functional data.

Detects significant spatial clusters in panels of multivariate curves
via four concentration indices (PMFSS, MDFFSS, MRBFSS, NPFSS) maximized
over circular windows, with permutation Monte-Carlo inference, secondary
clusters, a simulation harness and a CLI.
"""

from ._core import BACKEND
from .fdata import (
    DatasetTotals,
    FunctionalDataset,
    TimeGrid,
    WindowSummaries,
    dataset_totals,
    integrate_curve,
    trapezoid_weights,
    window_prefix_summaries,
)
from .geometry import (
    ScanWindow,
    SiteMap,
    WindowSet,
    build_distance_matrix,
    enumerate_windows,
)
from .inference import PermutationPlan, ScanReport, permutation_pvalue, permutation_test, secondary_clusters
from .simulation import (
    SimulationConfig,
    SimulationReport,
    delta_shift,
    evaluate_detection,
    france_departement_sites,
    generate_dataset,
    run_study,
    sample_noise_coefficients,
)
from .stats import (
    METHODS,
    RankField,
    ScanContext,
    StatisticValue,
    TylerConvergenceError,
    compute_pointwise_ranks,
    hotelling_sup_statistic,
    lh_statistic,
    npfss_statistic,
    pairwise_sign_field,
    pointwise_ranks_with_transform,
    scan_all_windows,
    tyler_transform,
    wilcoxon_sup_statistic,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DatasetTotals",
    "FunctionalDataset",
    "METHODS",
    "PermutationPlan",
    "RankField",
    "ScanContext",
    "ScanReport",
    "ScanWindow",
    "SimulationConfig",
    "SimulationReport",
    "SiteMap",
    "StatisticValue",
    "TimeGrid",
    "TylerConvergenceError",
    "WindowSet",
    "WindowSummaries",
    "build_distance_matrix",
    "compute_pointwise_ranks",
    "dataset_totals",
    "delta_shift",
    "enumerate_windows",
    "evaluate_detection",
    "france_departement_sites",
    "generate_dataset",
    "hotelling_sup_statistic",
    "integrate_curve",
    "lh_statistic",
    "npfss_statistic",
    "pairwise_sign_field",
    "permutation_pvalue",
    "permutation_test",
    "pointwise_ranks_with_transform",
    "run_study",
    "sample_noise_coefficients",
    "scan_all_windows",
    "secondary_clusters",
    "trapezoid_weights",
    "tyler_transform",
    "wilcoxon_sup_statistic",
    "window_prefix_summaries",
    "__version__",
]

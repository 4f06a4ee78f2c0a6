"""Density mode clustering: mean shift, gradient-flow ground truth, and risk.

The package pairs an estimator-style mean-shift implementation with an exact
gradient-flow oracle so that clustering risk (one minus the Rand index over
point pairs) can be measured against the true basins of attraction, decomposed
over cluster cores, and checked against the quantitative theory that predicts
when the risk is small.
"""

from .assignment import UNRESOLVED, ClusterAssignment, ModeSet, same_cluster
from .density import (
    DENSITY_FLOOR,
    DensityModel,
    Discrepancy,
    GaussianMixture,
    KernelDensityEstimate,
    build_probe_set,
    spherical_mixture,
    sup_discrepancy,
)
from .flow import FlowConfig, FlowResult, flow_at_times, integrate_flow, true_labels
from .mean_shift import KernelMeanShift, MeanShiftConfig, mean_shift_step, run_mean_shift
from .morse import (
    BoundaryLevel,
    CoreSpec,
    CriticalPoint,
    GradientFlowClustering,
    LandscapeStats,
    boundary_level,
    core_flags,
    core_membership,
    default_seeds,
    find_critical_points,
    landscape_stats,
    modes_of,
)
from .risk import (
    ReplicationResult,
    RiskReport,
    core_risk_decomposition,
    pairwise_loss,
    pairwise_loss_brute,
    rand_index,
    replicate_risk,
)
from .streams import substream
from .theory import (
    BoundCheckResult,
    DeltaProfileResult,
    check_chi_square_tail,
    check_flow_perturbation,
    check_gaussian_low_density,
    chi_square_tail_bound,
    delta_profile,
    low_density_epsilon_cap,
    low_density_required_separation,
)

__version__ = "0.1.0"

__all__ = [
    "UNRESOLVED", "ClusterAssignment", "ModeSet", "same_cluster",
    "DENSITY_FLOOR", "DensityModel", "Discrepancy", "GaussianMixture",
    "KernelDensityEstimate", "build_probe_set", "spherical_mixture", "sup_discrepancy",
    "FlowConfig", "FlowResult", "flow_at_times", "integrate_flow", "true_labels",
    "KernelMeanShift", "MeanShiftConfig", "mean_shift_step", "run_mean_shift",
    "BoundaryLevel", "CoreSpec", "CriticalPoint", "GradientFlowClustering",
    "LandscapeStats", "boundary_level", "core_flags", "core_membership",
    "default_seeds", "find_critical_points", "landscape_stats", "modes_of",
    "ReplicationResult", "RiskReport", "core_risk_decomposition", "pairwise_loss",
    "pairwise_loss_brute", "rand_index", "replicate_risk",
    "substream",
    "BoundCheckResult", "DeltaProfileResult", "check_chi_square_tail",
    "check_flow_perturbation", "check_gaussian_low_density", "chi_square_tail_bound",
    "delta_profile", "low_density_epsilon_cap", "low_density_required_separation",
    "__version__",
]

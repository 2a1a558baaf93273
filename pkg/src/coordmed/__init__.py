"""Coordinate-wise median facility location: mechanisms, optimal locations and worst-case analysis."""
from .analysis import (
    ARReport,
    DeviationReport,
    FamilyPoint,
    PNormBounds,
    ScanResult,
    alpha,
    approximation_ratio,
    conjecture_probe,
    dominance_experiment,
    eta_profile,
    family_scan,
    pnorm_bounds,
    sp_deviation_search,
    t_star,
    theorem1_value,
    worst_case_scan,
)
from .core import MedianRule, NormOrder, Point, Profile, distance, median_1d, social_cost
from .mechanisms import MechanismSpec, apply_mechanism, coordinate_wise_median, rotated_cm
from .optimal import OptimalResult, SolverConfig, geometric_median, grid_oracle, optimal_location
from .reductions import ReductionStep, ReductionTrace, cp_membership, reduce_to_icp

__all__ = [
    "ARReport", "DeviationReport", "FamilyPoint", "MechanismSpec", "MedianRule", "NormOrder",
    "OptimalResult", "PNormBounds", "Point", "Profile", "ReductionStep", "ReductionTrace",
    "ScanResult", "SolverConfig", "alpha", "apply_mechanism", "approximation_ratio",
    "conjecture_probe", "coordinate_wise_median", "cp_membership", "distance",
    "dominance_experiment", "eta_profile", "family_scan", "geometric_median", "grid_oracle",
    "median_1d", "optimal_location", "pnorm_bounds", "reduce_to_icp", "rotated_cm",
    "social_cost", "sp_deviation_search", "t_star", "theorem1_value", "worst_case_scan",
]

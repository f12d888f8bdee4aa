"""Exact enumeration oracle for subsampled mechanisms on small datasets."""

from privamp.oracle.checks import (
    KernelGroupProfiles,
    MechanismKernel,
    check_dominance,
    exact_subsampled_divergence,
    load_scenario,
    membership_kernel,
    parse_scenario,
    run_scenario,
    theorem_bound,
    verify_tightness,
)
from privamp.oracle.datasets import Dataset, enumerate_subsamples, key_distance, path_distance
from privamp.oracle.transport import (
    group_profile_sum,
    is_distance_compatible,
    min_cost_coupling,
    support_distances,
)

__all__ = [
    "Dataset",
    "KernelGroupProfiles",
    "MechanismKernel",
    "check_dominance",
    "enumerate_subsamples",
    "exact_subsampled_divergence",
    "group_profile_sum",
    "is_distance_compatible",
    "key_distance",
    "load_scenario",
    "membership_kernel",
    "min_cost_coupling",
    "parse_scenario",
    "path_distance",
    "run_scenario",
    "support_distances",
    "theorem_bound",
    "verify_tightness",
]

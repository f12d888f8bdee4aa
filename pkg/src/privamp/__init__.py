"""Privacy profiles and amplification-by-subsampling bounds with an exact oracle."""

from privamp.amplification import (
    AmplificationBound,
    Poisson,
    Relation,
    WithoutReplacement,
    WithReplacement,
    amplified_epsilon,
    amplified_profile_curve,
    amplify,
    amplify_poisson,
    amplify_poisson_substitution,
    amplify_wor,
    amplify_wr,
    amplify_wr_hybrid,
    scheme_eta,
    wr_weights,
)
from privamp.divergence import (
    DiscreteMeasure,
    advanced_joint_convexity,
    hockey_stick,
    maximal_coupling,
    total_variation,
)
from privamp.mgf import (
    PrivacyLossDistribution,
    QuadratureSpec,
    loss_distribution,
    mgf_from_profiles,
    profile_from_loss,
    renyi_epsilon,
    tail_bound_profile,
)
from privamp.profiles import (
    GroupMode,
    GroupProfile,
    PrivacyProfile,
    TabulatedProfile,
    empirical_profile,
    gaussian_profile,
    group_blackbox,
    group_whitebox,
    laplace_profile,
    rr_profile,
)

__all__ = [name for name in dir() if not name.startswith("_")]

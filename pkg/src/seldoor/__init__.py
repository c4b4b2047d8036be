"""Selective-door adjustment for linear structural equation models on
acyclic directed mixed graphs."""

__version__ = "0.1.0"

from .graph import (
    Admg,
    Path,
    S1S2Partition,
    VertexId,
    ancestors,
    backdoor_criterion,
    blocks,
    blocks_all_backdoor,
    blocks_all_paths,
    descendants,
    enumerate_paths,
    is_backdoor,
    is_directed,
    no_confounding_equivalence,
    partition_s1_s2,
    project_nonlinear,
    selective_door_criterion,
    single_door_criterion,
    single_door_precondition,
    validate,
)
from .sem import (
    MomentSet,
    RegressionResult,
    SemModel,
    ancestral_expansion,
    controlled_total_effect,
    moments,
    partial_regression,
    residual_checks,
    total_effect,
    validate_model,
)
from .adjust import (
    AdjustmentQuery,
    EffectReport,
    bias_decomposition,
    corollary_backdoor,
    corollary_single_door,
    corollary_zero,
    identify,
    lemma_covariances,
    lemma_rewiring,
    tilde_system,
)
from .montecarlo import (
    Dataset,
    NonlinearModelSpec,
    ParamRanges,
    TrialSummary,
    nonlinear_demo,
    ols,
    random_model,
    sample_data,
    verify_necessity,
)

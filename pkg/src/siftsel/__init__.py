"""Query-conditioned data selection over inner-product embeddings.

Given a query vector and a pool of candidate row embeddings, pick the rows
that most reduce the regularized posterior variance of the query — a greedy
variance-minimization rule that automatically trades relevance against
redundancy, with a lazy-evaluation variant for large pools, nearest-neighbor
and uncertainty-sampling baselines, an uncertainty calculus (information
gains, confidence widths, adaptive stopping), and simple binary/CSV file
formats plus a command line front end.
"""

from .core import (
    EmbeddingSet,
    KernelConfig,
    NEGATIVE_VARIANCE_TOL,
    as_query,
    conditional_downdate,
    normalize_rows,
    posterior_variance,
    posterior_variance_feature_space,
    spd_solve,
    tv_distance,
)
from .errors import (
    BadMagic,
    DegenerateVariance,
    DimensionMismatch,
    EmbeddingIOError,
    InputError,
    InstanceTooLarge,
    InvalidParameter,
    NonFiniteValue,
    NotAProbabilityVector,
    NotEnoughCandidates,
    NumericalFailure,
    RaggedRow,
    SiftselError,
    TruncatedPayload,
    ZeroNormRow,
)
from .io import (
    EmbeddingFileHeader,
    read_embeddings,
    read_header,
    read_selection,
    write_embeddings,
    write_selection,
)
from .reference import (
    OracleReport,
    compare_runs,
    exhaustive_optimum,
    greedy_direct_oracle,
    nn_insufficiency_instance,
)
from .selectors import (
    FastState,
    SelectionResult,
    nn_select,
    preselect_candidates,
    sift_fast_select,
    sift_select,
    uncertainty_sampling_select,
)
from .uncertainty import (
    ConfidenceParams,
    InfoGain,
    ProbeReport,
    StoppingPolicy,
    adaptive_should_stop,
    apply_adaptive_stopping,
    beta_classification,
    beta_regression,
    convergence_bound_rhs,
    data_space_lambda_min,
    irreducible_uncertainty,
    marginal_gain,
    marginal_info_gain,
    predicted_performance_gain,
    realized_info_gain,
    selected_gram_lambda_hat,
    submodularity_probe,
    uncertainty_reduction,
)

__version__ = "0.1.0"

__all__ = [
    "EmbeddingSet",
    "KernelConfig",
    "NEGATIVE_VARIANCE_TOL",
    "as_query",
    "conditional_downdate",
    "normalize_rows",
    "posterior_variance",
    "posterior_variance_feature_space",
    "spd_solve",
    "tv_distance",
    "SiftselError",
    "InputError",
    "DimensionMismatch",
    "ZeroNormRow",
    "NotEnoughCandidates",
    "NotAProbabilityVector",
    "InvalidParameter",
    "InstanceTooLarge",
    "DegenerateVariance",
    "NumericalFailure",
    "EmbeddingIOError",
    "BadMagic",
    "TruncatedPayload",
    "NonFiniteValue",
    "RaggedRow",
    "EmbeddingFileHeader",
    "read_embeddings",
    "read_header",
    "read_selection",
    "write_embeddings",
    "write_selection",
    "OracleReport",
    "compare_runs",
    "exhaustive_optimum",
    "greedy_direct_oracle",
    "nn_insufficiency_instance",
    "FastState",
    "SelectionResult",
    "nn_select",
    "preselect_candidates",
    "sift_fast_select",
    "sift_select",
    "uncertainty_sampling_select",
    "ConfidenceParams",
    "InfoGain",
    "ProbeReport",
    "StoppingPolicy",
    "adaptive_should_stop",
    "apply_adaptive_stopping",
    "beta_classification",
    "beta_regression",
    "convergence_bound_rhs",
    "data_space_lambda_min",
    "irreducible_uncertainty",
    "marginal_gain",
    "marginal_info_gain",
    "predicted_performance_gain",
    "realized_info_gain",
    "selected_gram_lambda_hat",
    "submodularity_probe",
    "uncertainty_reduction",
]

"""Bi-objective genetic programming for symbolic regression that trades
prediction error against a human-feedback-derived interpretability
estimate, plus the pipeline that learns the estimate from survey data and
the harness for seeded comparative experiments."""

__version__ = "0.1.0"

from .expr_core import (
    BinaryOp,
    Constant,
    EpsilonConfig,
    ExprTree,
    MalformedTreeError,
    UnaryOp,
    Variable,
    VariableIndexError,
    eval_tree,
    one_point_mutation,
    parse_infix,
    ramped_half_and_half,
    random_tree,
    subtree_crossover,
)
from .phi_features import (
    DEFAULT_COEFFICIENTS,
    FeatureVector,
    PhiCoefficients,
    extract_features,
    load_coefficients,
    phi_estimate,
    phi_objective,
)
from .objectives import (
    ObjectiveVector,
    ScalingCoeffs,
    evaluate_individual,
    linear_scaling_coeffs,
    normalize_err,
    scaled_mse,
)
from .moea import (
    EvolutionConfig,
    Individual,
    crowded_tournament,
    crowding_distance,
    dominates,
    evolve,
    fast_nondominated_sort,
)
from .phi_trainer import (
    ElasticNetHyper,
    SurveyAnswer,
    SurveySample,
    bin_weights,
    build_regression_dataset,
    fit_elastic_net_sgd,
    loo_cross_validate,
)
from .stats_eval import (
    FrontRecord,
    holm_bonferroni,
    select_tau,
    validation_front,
    wilcoxon_signed_rank,
)
from .data_io import (
    Dataset,
    SplitIndices,
    generate_synthetic,
    load_bundled,
    load_csv,
    split,
    standardize,
)

"""Counterfactual evaluation of feature-attribution explanations.

Explanations are scored by how easily their selected features can be edited
to flip a classifier's decision, next to erasure baselines, and explainers
are ranked against a logistic-regression whitebox.
"""

from .blackbox import (
    LogisticModel,
    Prediction,
    TrainConfig,
    gradient,
    ground_truth_features,
    load_model,
    predict,
    recovery_fraction,
    save_model,
    train_logistic,
)
from .counterfactual import (
    CounterfactualResult,
    OptimizerConfig,
    batch_counterfactuals,
    continuous_search,
    discrete_search,
    distance,
)
from .dataset import (
    Dataset,
    EmbeddingTable,
    FeatureSchema,
    FeatureSpec,
    Instance,
    Representation,
    SyntheticSpec,
    decode,
    encode,
    load_tabular,
    load_text,
    synthesize,
)
from .errors import CFEvalError, ConfigError, DataError, NumericalError
from .explainers import (
    DecisionBoundaryConfig,
    LimeConfig,
    decision_boundary_explain,
    lime_explain,
    omission_explain,
    random_explain,
    whitebox_self_explain,
)
from .explanation import Explanation
from .metrics import (
    MethodScores,
    ces,
    ces_soft,
    comprehensiveness,
    dfr,
    erase,
    proximity,
    sufficiency,
    validity,
    validity_soft,
)
from .rankstats import Ranking, kendall_tau, rank, spearman_rho
from .report import EvaluationReport, build_report, emit

__version__ = "0.1.0"

__all__ = [
    "LogisticModel",
    "Prediction",
    "TrainConfig",
    "gradient",
    "ground_truth_features",
    "load_model",
    "predict",
    "recovery_fraction",
    "save_model",
    "train_logistic",
    "CounterfactualResult",
    "OptimizerConfig",
    "batch_counterfactuals",
    "continuous_search",
    "discrete_search",
    "distance",
    "Dataset",
    "EmbeddingTable",
    "FeatureSchema",
    "FeatureSpec",
    "Instance",
    "Representation",
    "SyntheticSpec",
    "decode",
    "encode",
    "load_tabular",
    "load_text",
    "synthesize",
    "DecisionBoundaryConfig",
    "LimeConfig",
    "decision_boundary_explain",
    "lime_explain",
    "omission_explain",
    "random_explain",
    "whitebox_self_explain",
    "MethodScores",
    "ces",
    "ces_soft",
    "comprehensiveness",
    "dfr",
    "erase",
    "proximity",
    "sufficiency",
    "validity",
    "validity_soft",
    "CFEvalError",
    "ConfigError",
    "DataError",
    "NumericalError",
    "Explanation",
    "Ranking",
    "kendall_tau",
    "rank",
    "spearman_rho",
    "EvaluationReport",
    "build_report",
    "emit",
]

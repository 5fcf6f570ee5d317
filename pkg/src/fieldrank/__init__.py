"""Multi-field neural ranking toolkit.

Implements and compares four scoring architectures over structured
documents (representation-based, implicit concatenation, Hadamard
query-field interactions, field-weighted factorization machine), with a
click-log pipeline, pairwise training, NDCG evaluation, component
analysis and significance testing.
"""

from .data import (
    DocumentRecord,
    Fold,
    FoldSet,
    IngestLog,
    QueryGroup,
    SearchEvent,
    build_query_groups,
    parse_documents,
    parse_search_log,
    pipeline_stats,
    temporal_split,
)
from .errors import (
    BundleError,
    ConfigError,
    EvaluationError,
    FieldRankError,
    NumericError,
    ParseError,
    ShapeError,
    UsageError,
)
from .estimator import FieldRanker, validate_groups
from .evaluation import (
    ComponentScoreTable,
    EvalReport,
    component_distributions,
    evaluate_groups,
    evaluate_model,
    feature_label_correlation,
    ndcg_at_k,
    select_features_by_correlation,
)
from .gradcheck import numerical_grad_check
from .models import FIELDS, ModelConfig, RankingModel, interaction_pairs
from .params import ParamStore, load_checkpoint, save_checkpoint
from .significance import paired_t_test, tukey_hsd
from .synth import SynthSpec, generate as synth_generate
from .training import (
    Hyperparams,
    generate_pairs,
    pairwise_loss,
    pointwise_loss,
    train_ranker,
)

__version__ = "0.1.0"

__all__ = [
    "BundleError",
    "ComponentScoreTable",
    "ConfigError",
    "DocumentRecord",
    "EvalReport",
    "EvaluationError",
    "FIELDS",
    "FieldRankError",
    "FieldRanker",
    "Fold",
    "FoldSet",
    "Hyperparams",
    "IngestLog",
    "ModelConfig",
    "NumericError",
    "ParamStore",
    "ParseError",
    "QueryGroup",
    "RankingModel",
    "SearchEvent",
    "ShapeError",
    "SynthSpec",
    "UsageError",
    "build_query_groups",
    "component_distributions",
    "evaluate_groups",
    "evaluate_model",
    "feature_label_correlation",
    "generate_pairs",
    "interaction_pairs",
    "load_checkpoint",
    "ndcg_at_k",
    "numerical_grad_check",
    "paired_t_test",
    "pairwise_loss",
    "parse_documents",
    "parse_search_log",
    "pipeline_stats",
    "pointwise_loss",
    "save_checkpoint",
    "select_features_by_correlation",
    "synth_generate",
    "temporal_split",
    "train_ranker",
    "tukey_hsd",
    "validate_groups",
]

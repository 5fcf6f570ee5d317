"""Scikit-learn style estimator wrapping the ranking architectures.

`FieldRanker` follows the estimator protocol (get_params/set_params/clone,
fit returns self, fitted attributes carry a trailing underscore) so it
composes with the wider ecosystem, but `X` is a list of QueryGroup, the
unit this problem ranks and evaluates on, rather than a 2-d array.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .data import QueryGroup
from .errors import UsageError
from .evaluation import ComponentScoreTable, evaluate_groups
from .models import ModelConfig, RankingModel, make_item_batch, score_groups
from .training import Hyperparams, train_ranker
from .text import index_groups


def validate_groups(groups, name: str = "X") -> list[QueryGroup]:
    """Check the query-group invariants before using them.

    Every group must align documents with binary labels and carry exactly
    one positive, at the last index (the trim-at-click convention).
    """
    if isinstance(groups, QueryGroup):
        raise UsageError(f"{name} must be a list of QueryGroup, not a single group")
    groups = list(groups)
    if not groups:
        raise UsageError(f"{name} is empty")
    for gi, g in enumerate(groups):
        if not isinstance(g, QueryGroup):
            raise UsageError(f"{name}[{gi}] is not a QueryGroup (got {type(g).__name__})")
        if len(g.documents) != len(g.labels):
            raise UsageError(
                f"{name}[{gi}]: {len(g.documents)} documents vs {len(g.labels)} labels"
            )
        if any(l not in (0, 1) for l in g.labels):
            raise UsageError(f"{name}[{gi}]: labels must be binary")
        if sum(g.labels) != 1:
            raise UsageError(f"{name}[{gi}]: expected exactly one positive label")
        if g.labels[-1] != 1:
            raise UsageError(f"{name}[{gi}]: the positive label must be at the last index")
    return groups


class FieldRanker(BaseEstimator):
    """Multi-field neural ranker with a fit/predict/score surface.

    Parameters mirror the model configuration axes (architecture,
    interaction selection, first-order toggle, dimensions) plus the
    training hyperparameters. See ModelConfig for the architecture ids.
    """

    def __init__(
        self,
        architecture: str = "fwfm",
        interaction_mode: str = "query-field",
        selected_pairs=None,
        use_first_order: bool = True,
        first_order_fields=None,
        text_dim: int = 32,
        country_dim: int = 4,
        mlp_widths=(64, 64),
        learning_rate: float = 1e-3,
        batch_size: int = 256,
        max_epochs: int = 50,
        patience: int = 3,
        min_count: int = 2,
        ndcg_k: int = 20,
        seed: int = 0,
    ):
        self.architecture = architecture
        self.interaction_mode = interaction_mode
        self.selected_pairs = selected_pairs
        self.use_first_order = use_first_order
        self.first_order_fields = first_order_fields
        self.text_dim = text_dim
        self.country_dim = country_dim
        self.mlp_widths = mlp_widths
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.min_count = min_count
        self.ndcg_k = ndcg_k
        self.seed = seed

    def model_config(self) -> ModelConfig:
        cfg = ModelConfig(
            architecture=self.architecture,
            interaction_mode=self.interaction_mode,
            selected_pairs=(
                tuple(tuple(p) for p in self.selected_pairs) if self.selected_pairs else None
            ),
            use_first_order=self.use_first_order,
            first_order_fields=(
                tuple(self.first_order_fields) if self.first_order_fields is not None else None
            ),
            text_dim=self.text_dim,
            country_dim=self.country_dim,
            mlp_widths=tuple(self.mlp_widths),
            seed=self.seed,
        )
        cfg.validate()
        return cfg

    def hyperparams(self) -> Hyperparams:
        return Hyperparams(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            patience=self.patience,
            min_count=self.min_count,
            ndcg_k=self.ndcg_k,
        )

    def fit(self, X, y=None, validation=None):
        """Train on a list of QueryGroup; `y` is ignored (labels live in the
        groups). With `validation` the best epoch by NDCG@k is kept."""
        train = validate_groups(X, "X")
        val = validate_groups(validation, "validation") if validation is not None else None
        result = train_ranker(self.model_config(), train, val, self.hyperparams())
        self.model_: RankingModel = result.model
        self.vocab_ = result.vocab
        self.categories_ = result.categories
        self.training_log_ = result.log
        self.best_epoch_ = result.best_epoch
        self.best_val_ndcg_ = result.best_val_ndcg
        self.n_parameters_ = result.model.n_parameters()
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "model_"):
            raise NotFittedError("this FieldRanker is not fitted yet; call fit first")

    def _index(self, groups):
        return index_groups(groups, self.vocab_, self.categories_)

    def predict(self, X) -> list[np.ndarray]:
        """Scores per group, one array per group in document order."""
        self._check_fitted()
        groups = validate_groups(X, "X")
        return score_groups(self.model_, self._index(groups))

    def score(self, X, y=None) -> float:
        """Mean NDCG@k over multi-document groups (higher is better)."""
        self._check_fitted()
        groups = validate_groups(X, "X")
        scores = self.predict(groups)
        return evaluate_groups(scores, [g.labels for g in groups], self.ndcg_k).mean_ndcg

    def component_table(self, X) -> ComponentScoreTable:
        """FwFM additive component scores per (group, document) with labels."""
        self._check_fitted()
        groups = validate_groups(X, "X")
        indexed = self._index(groups)
        items = [(g, i) for g in indexed for i in range(len(g.docs))]
        matrix = self.model_.component_scores(make_item_batch(items))
        labels = np.concatenate([g.labels for g in indexed])
        return ComponentScoreTable(
            components=self.model_.component_names(), scores=matrix, labels=labels
        )

"""NDCG, fold evaluation, FwFM component analysis and feature selection."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, EvaluationError, ShapeError, UsageError
from .models import FIELDS, ModelConfig


def ndcg_at_k(scores, labels, k: int) -> float:
    """Normalised discounted cumulative gain with a rank cutoff.

    Documents are ranked by descending score, ties broken by ascending
    document index; gains are the binary labels. All-zero labels return 0.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ShapeError(
            f"scores and labels must be equal-length vectors, got {scores.shape} and {labels.shape}"
        )
    if k < 1:
        raise UsageError(f"NDCG cutoff must be >= 1, got {k}")
    order = np.argsort(-scores, kind="stable")
    top = labels[order[:k]]
    discounts = 1.0 / np.log2(np.arange(2, len(top) + 2))
    dcg = float(top @ discounts)
    ideal = np.sort(labels)[::-1][:k]
    idcg = float(ideal @ (1.0 / np.log2(np.arange(2, len(ideal) + 2))))
    if idcg == 0.0:
        return 0.0
    return dcg / idcg


@dataclass
class FoldEval:
    mean_ndcg: float
    n_groups: int
    n_excluded: int


def evaluate_groups(score_lists, label_lists, k: int) -> FoldEval:
    """Mean NDCG@k over multi-document groups; single-doc groups are excluded
    (their NDCG is trivially 1 and would inflate the mean) but counted."""
    if len(score_lists) != len(label_lists):
        raise ShapeError("score and label lists differ in length")
    values = []
    excluded = 0
    for scores, labels in zip(score_lists, label_lists):
        if len(labels) < 2:
            excluded += 1
            continue
        values.append(ndcg_at_k(scores, labels, k))
    if not values:
        raise EvaluationError("no multi-document group to evaluate")
    return FoldEval(mean_ndcg=float(np.mean(values)), n_groups=len(values), n_excluded=excluded)


def evaluate_model(model, groups, k: int) -> FoldEval:
    """Evaluate anything with a predict(groups) -> list-of-score-arrays method."""
    scores = model.predict(groups)
    labels = [g.labels for g in groups]
    return evaluate_groups(scores, labels, k)


@dataclass
class EvalReport:
    """Cross-fold evaluation summary for one model variant."""

    variant: str
    k: int
    fold_ndcg: list[float]
    n_groups: list[int]
    n_excluded: list[int]
    config_hash: str
    n_parameters: int

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_ndcg))

    @property
    def std(self) -> float:
        if len(self.fold_ndcg) < 2:
            return 0.0
        return float(np.std(self.fold_ndcg, ddof=1))

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "k": self.k,
            "fold_ndcg": self.fold_ndcg,
            "mean_ndcg": self.mean,
            "std_ndcg": self.std,
            "n_groups": self.n_groups,
            "n_excluded_single_doc": self.n_excluded,
            "config_hash": self.config_hash,
            "n_parameters": self.n_parameters,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            variant=d["variant"],
            k=d["k"],
            fold_ndcg=list(d["fold_ndcg"]),
            n_groups=list(d["n_groups"]),
            n_excluded=list(d["n_excluded_single_doc"]),
            config_hash=d["config_hash"],
            n_parameters=d["n_parameters"],
        )


@dataclass
class ComponentScoreTable:
    """Per (group, document) additive FwFM component scores plus the label."""

    components: list[str]
    scores: np.ndarray  # (rows, components)
    labels: np.ndarray  # (rows,)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if self.scores.ndim != 2 or self.scores.shape[1] != len(self.components):
            raise ShapeError(
                f"component matrix shape {self.scores.shape} does not match "
                f"{len(self.components)} component names"
            )
        if self.labels.shape != (self.scores.shape[0],):
            raise ShapeError("labels do not align with component rows")

    @property
    def n_rows(self) -> int:
        return self.scores.shape[0]

    def to_dict(self) -> dict:
        return {
            "components": self.components,
            "labels": self.labels.astype(int).tolist(),
            "scores": [[float(v) for v in row] for row in self.scores],
            "correlations": feature_label_correlation(self),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ComponentScoreTable":
        return cls(
            components=list(d["components"]),
            scores=np.asarray(d["scores"], dtype=np.float64),
            labels=np.asarray(d["labels"], dtype=np.float64),
        )


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt((xc @ xc) * (yc @ yc))
    if denom == 0.0:
        return 0.0  # zero-variance convention
    return float((xc @ yc) / denom)


def feature_label_correlation(table: ComponentScoreTable) -> dict[str, float]:
    """Pearson correlation of each component column against the label column."""
    if table.n_rows < 2:
        raise EvaluationError("need at least 2 rows to correlate components with labels")
    return {
        name: _pearson(table.scores[:, j], table.labels)
        for j, name in enumerate(table.components)
    }


def default_top_m(correlations: dict[str, float]) -> int:
    """Components with |correlation| above the mean |correlation|."""
    mags = np.abs(np.array(list(correlations.values())))
    return int(np.sum(mags > mags.mean()))


def select_features_by_correlation(
    correlations: dict[str, float], top_m: int, base: ModelConfig
) -> ModelConfig:
    """Keep the top_m components by |correlation| and emit the matching config.

    Component names are either a field (first-order term) or "a-b" (an
    interaction pair); ties rank in the given canonical order.
    """
    names = list(correlations)
    if top_m < 1:
        raise ConfigError(f"top_m must be >= 1, got {top_m}")
    if top_m > len(names):
        raise ConfigError(f"top_m={top_m} exceeds the {len(names)} available components")
    ranked = sorted(range(len(names)), key=lambda i: (-abs(correlations[names[i]]), i))
    kept = {names[i] for i in ranked[:top_m]}

    pairs = tuple(tuple(n.split("-")) for n in names if "-" in n and n in kept)
    fo = tuple(f for f in FIELDS if f in kept)
    if not pairs:
        raise ConfigError(
            "selection kept no interaction pair; the fwfm architecture needs at least one"
        )
    return replace(
        base,
        interaction_mode="selected",
        selected_pairs=pairs,
        use_first_order=bool(fo),
        first_order_fields=fo if fo else None,
    )


def component_distributions(table: ComponentScoreTable, bins: int = 64) -> list[dict]:
    """Fixed-bin histograms per component, split by label, for plotting.

    Returns rows of {component, label, bin_lo, bin_hi, count}; per label the
    counts sum to that label's row count.
    """
    if table.n_rows == 0:
        raise EvaluationError("component table is empty")
    rows: list[dict] = []
    for j, name in enumerate(table.components):
        col = table.scores[:, j]
        lo, hi = float(col.min()), float(col.max())
        if hi == lo:
            hi = lo + 1.0  # one occupied bin for constant components
        edges = np.linspace(lo, hi, bins + 1)
        for label in (0, 1):
            counts, _ = np.histogram(col[table.labels == label], bins=edges)
            for b in range(bins):
                rows.append(
                    {
                        "component": name,
                        "label": label,
                        "bin_lo": float(edges[b]),
                        "bin_hi": float(edges[b + 1]),
                        "count": int(counts[b]),
                    }
                )
    return rows

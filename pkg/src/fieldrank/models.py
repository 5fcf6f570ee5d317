"""The scoring architectures and interaction-selection machinery.

Four architectures over five fields (query, title, description,
ingredients, country):

- representation:   separate query/document encoders, cosine similarity
- implicit-concat:  all field vectors concatenated into one MLP
- nrmf:             pairwise Hadamard interactions, concatenated, MLP scorer
- fwfm:             weighted dot-product interactions plus first-order terms,
                    summed (field-weighted factorization machine)

All scores are pre-sigmoid and are what ranking uses; a sigmoid appears
only in the loss heads.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, UsageError
from .ops import (
    DenseLayer,
    MLP,
    concat,
    concat_backward,
    cosine_similarity,
    cosine_similarity_backward,
    hadamard,
    hadamard_backward,
)
from .params import ParamStore
from .text import (
    IndexedGroup,
    TokenBatch,
    pooled_embedding_backward,
    pooled_embedding_forward,
)

FIELDS = ("query", "title", "description", "ingredients", "country")
DOC_FIELDS = FIELDS[1:]
TEXT_FIELDS = FIELDS[:4]

ARCHITECTURES = ("representation", "implicit-concat", "nrmf", "fwfm")
INTERACTION_MODES = ("query-field", "all", "selected")

EMBEDDING_INIT_RANGE = 0.05
PAIR_WEIGHT_INIT = 0.5


def canonical_pair(a: str, b: str) -> tuple[str, str]:
    for f in (a, b):
        if f not in FIELDS:
            raise ConfigError(f"unknown field '{f}', expected one of {FIELDS}")
    if a == b:
        raise ConfigError(f"self-interaction '{a}' x '{b}' is not allowed")
    return (a, b) if FIELDS.index(a) < FIELDS.index(b) else (b, a)


def interaction_pairs(
    mode: str, selected: tuple[tuple[str, str], ...] | None = None
) -> list[tuple[str, str]]:
    """The ordered list of unordered field pairs a model interacts.

    `all` yields the C(5,2)=10 pairs in canonical field order, `query-field`
    the 4 pairs involving the query, `selected` a validated explicit list.
    """
    if mode == "all":
        return [
            (FIELDS[i], FIELDS[j])
            for i in range(len(FIELDS))
            for j in range(i + 1, len(FIELDS))
        ]
    if mode == "query-field":
        return [("query", f) for f in DOC_FIELDS]
    if mode == "selected":
        if not selected:
            raise ConfigError("interaction mode 'selected' needs a non-empty pair list")
        pairs = [canonical_pair(a, b) for a, b in selected]
        if len(set(pairs)) != len(pairs):
            raise ConfigError(f"selected interaction pairs contain duplicates: {selected}")
        pairs.sort(key=lambda p: (FIELDS.index(p[0]), FIELDS.index(p[1])))
        return pairs
    raise ConfigError(f"unknown interaction mode '{mode}', expected one of {INTERACTION_MODES}")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture choice plus the configuration axes it is ablated along."""

    architecture: str = "fwfm"
    interaction_mode: str = "query-field"
    selected_pairs: tuple[tuple[str, str], ...] | None = None
    use_first_order: bool = True
    first_order_fields: tuple[str, ...] | None = None
    text_dim: int = 32
    country_dim: int = 4
    mlp_widths: tuple[int, ...] = (64, 64)
    seed: int = 0

    def validate(self) -> None:
        if self.architecture not in ARCHITECTURES:
            raise ConfigError(
                f"unknown architecture '{self.architecture}', expected one of {ARCHITECTURES}"
            )
        if self.interaction_mode not in INTERACTION_MODES:
            raise ConfigError(
                f"unknown interaction mode '{self.interaction_mode}', "
                f"expected one of {INTERACTION_MODES}"
            )
        if self.text_dim < 1 or self.country_dim < 1:
            raise ConfigError("embedding dimensions must be positive")
        if any(w < 1 for w in self.mlp_widths):
            raise ConfigError("MLP widths must be positive")
        if self.architecture == "representation" and not self.mlp_widths:
            raise ConfigError("the representation architecture needs at least one encoder width")
        if self.interaction_mode == "selected":
            interaction_pairs("selected", self.selected_pairs)
        if self.first_order_fields is not None:
            unknown = [f for f in self.first_order_fields if f not in FIELDS]
            if unknown:
                raise ConfigError(f"unknown first-order fields: {unknown}")
            if len(set(self.first_order_fields)) != len(self.first_order_fields):
                raise ConfigError("first-order fields contain duplicates")

    def pairs(self) -> list[tuple[str, str]]:
        return interaction_pairs(self.interaction_mode, self.selected_pairs)

    def first_order(self) -> tuple[str, ...]:
        """The fields contributing first-order terms (empty when disabled)."""
        if not self.use_first_order:
            return ()
        if self.first_order_fields is None:
            return FIELDS
        return tuple(f for f in FIELDS if f in self.first_order_fields)

    @property
    def projects_country(self) -> bool:
        # interaction architectures need every field in the shared dimension
        return self.architecture in ("nrmf", "fwfm")

    def with_seed(self, seed: int) -> "ModelConfig":
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        return {
            "architecture": self.architecture,
            "interaction_mode": self.interaction_mode,
            "selected_pairs": (
                [list(p) for p in self.selected_pairs] if self.selected_pairs else None
            ),
            "use_first_order": self.use_first_order,
            "first_order_fields": (
                list(self.first_order_fields) if self.first_order_fields is not None else None
            ),
            "text_dim": self.text_dim,
            "country_dim": self.country_dim,
            "mlp_widths": list(self.mlp_widths),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        kwargs = dict(d)
        if kwargs.get("selected_pairs") is not None:
            kwargs["selected_pairs"] = tuple(tuple(p) for p in kwargs["selected_pairs"])
        if kwargs.get("first_order_fields") is not None:
            kwargs["first_order_fields"] = tuple(kwargs["first_order_fields"])
        if kwargs.get("mlp_widths") is not None:
            kwargs["mlp_widths"] = tuple(kwargs["mlp_widths"])
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass
class ItemBatch:
    """A padded batch of (query, document) scoring items."""

    tokens: dict[str, TokenBatch]  # query/title/description/ingredients
    country: np.ndarray  # (B,) int64

    @property
    def size(self) -> int:
        return len(self.country)


def make_item_batch(items: list[tuple[IndexedGroup, int]]) -> ItemBatch:
    tokens = {"query": TokenBatch.from_lists([g.query_ids for g, _ in items])}
    for f in ("title", "description", "ingredients"):
        tokens[f] = TokenBatch.from_lists([g.docs[i].fields[f] for g, i in items])
    country = np.array([g.docs[i].country for g, i in items], dtype=np.int64)
    return ItemBatch(tokens=tokens, country=country)


class RankingModel:
    """One architecture bound to vocabulary sizes and a parameter store.

    Parameter registration order is fixed so that identical config + seed
    yields a bitwise identical store (and checkpoint).
    """

    def __init__(self, config: ModelConfig, vocab_size: int, n_categories: int):
        config.validate()
        self.config = config
        self.vocab_size = int(vocab_size)
        self.n_categories = int(n_categories)
        self.store = ParamStore()
        rng = np.random.default_rng(config.seed)

        r = EMBEDDING_INIT_RANGE
        self.emb_text = self.store.create(
            "emb_text", rng.uniform(-r, r, size=(self.vocab_size, config.text_dim))
        )
        self.emb_country = self.store.create(
            "emb_country", rng.uniform(-r, r, size=(self.n_categories, config.country_dim))
        )
        self.country_proj: DenseLayer | None = None
        if config.projects_country:
            self.country_proj = DenseLayer.create(
                self.store, "country_proj", rng, config.country_dim, config.text_dim
            )

        d = config.text_dim
        self._pairs = config.pairs() if config.architecture in ("nrmf", "fwfm") else []
        self._first_order = (
            config.first_order() if config.architecture in ("nrmf", "fwfm") else ()
        )

        arch = config.architecture
        if arch == "representation":
            widths, out = config.mlp_widths[:-1], config.mlp_widths[-1]
            self.query_encoder = MLP.create(self.store, "query_enc", rng, d, widths, out)
            doc_in = 3 * d + config.country_dim
            self.doc_encoder = MLP.create(self.store, "doc_enc", rng, doc_in, widths, out)
        elif arch == "implicit-concat":
            in_dim = 4 * d + config.country_dim
            self.mlp = MLP.create(self.store, "mlp", rng, in_dim, config.mlp_widths, 1)
        elif arch == "nrmf":
            in_dim = (len(self._pairs) + len(self._first_order)) * d
            self.mlp = MLP.create(self.store, "mlp", rng, in_dim, config.mlp_widths, 1)
        elif arch == "fwfm":
            self.fo_weights = {
                f: self.store.create(f"fw.w.{f}", np.zeros(d)) for f in self._first_order
            }
            self.pair_weights = {
                p: self.store.create(f"fw.r.{p[0]}-{p[1]}", np.array(PAIR_WEIGHT_INIT))
                for p in self._pairs
            }

    # ---- field encoding ------------------------------------------------

    def field_dim(self, f: str) -> int:
        if f == "country" and not self.config.projects_country:
            return self.config.country_dim
        return self.config.text_dim

    def encode_fields(self, batch: ItemBatch):
        """Token batches -> one vector per field per item."""
        fv: dict[str, np.ndarray] = {}
        for f in TEXT_FIELDS:
            fv[f] = pooled_embedding_forward(self.emb_text.value, batch.tokens[f])
        country_raw = self.emb_country.value[batch.country]
        proj_cache = None
        if self.country_proj is not None:
            fv["country"], proj_cache = self.country_proj.forward(country_raw)
        else:
            fv["country"] = country_raw
        return fv, (batch, proj_cache)

    def encode_backward(self, cache, dfv: dict[str, np.ndarray]) -> None:
        batch, proj_cache = cache
        dtext = np.zeros_like(self.emb_text.value)
        for f in TEXT_FIELDS:
            pooled_embedding_backward(dtext, batch.tokens[f], dfv[f])
        self.emb_text.add_grad(dtext)

        dcountry = dfv["country"]
        if self.country_proj is not None:
            dcountry = self.country_proj.backward(proj_cache, dcountry)
        dctable = np.zeros_like(self.emb_country.value)
        np.add.at(dctable, batch.country, dcountry)
        self.emb_country.add_grad(dctable)

    # ---- scoring -------------------------------------------------------

    def forward(self, batch: ItemBatch):
        """Scores for a batch of items, plus the cache for backward."""
        fv, enc_cache = self.encode_fields(batch)
        arch = self.config.architecture
        if arch == "representation":
            qe, q_caches = self.query_encoder.forward(fv["query"])
            doc_in = concat([fv[f] for f in DOC_FIELDS])
            de, d_caches = self.doc_encoder.forward(doc_in)
            scores, cos_cache = cosine_similarity(qe, de)
            return scores, (enc_cache, fv, (q_caches, d_caches, cos_cache))
        if arch == "implicit-concat":
            x = concat([fv[f] for f in FIELDS])
            y, caches = self.mlp.forward(x)
            return y[:, 0], (enc_cache, fv, caches)
        if arch == "nrmf":
            parts = [hadamard(fv[a], fv[b]) for a, b in self._pairs]
            parts += [fv[f] for f in self._first_order]
            x = concat(parts)
            y, caches = self.mlp.forward(x)
            return y[:, 0], (enc_cache, fv, caches)
        comp = self._fwfm_components(fv)
        return comp.sum(axis=1), (enc_cache, fv, None)

    def backward(self, cache, dscores: np.ndarray) -> None:
        """Accumulate parameter gradients for d(loss)/d(scores)."""
        enc_cache, fv, scorer_cache = cache
        dscores = np.asarray(dscores, dtype=np.float64)
        dfv = {f: np.zeros_like(fv[f]) for f in FIELDS}
        arch = self.config.architecture

        if arch == "representation":
            q_caches, d_caches, cos_cache = scorer_cache
            dqe, dde = cosine_similarity_backward(cos_cache, dscores)
            dfv["query"] += self.query_encoder.backward(q_caches, dqe)
            ddoc = self.doc_encoder.backward(d_caches, dde)
            sizes = [fv[f].shape[1] for f in DOC_FIELDS]
            for f, piece in zip(DOC_FIELDS, concat_backward(ddoc, sizes)):
                dfv[f] += piece
        elif arch == "implicit-concat":
            dx = self.mlp.backward(scorer_cache, dscores[:, None])
            sizes = [fv[f].shape[1] for f in FIELDS]
            for f, piece in zip(FIELDS, concat_backward(dx, sizes)):
                dfv[f] += piece
        elif arch == "nrmf":
            dx = self.mlp.backward(scorer_cache, dscores[:, None])
            sizes = [self.config.text_dim] * (len(self._pairs) + len(self._first_order))
            pieces = concat_backward(dx, sizes)
            for (a, b), g in zip(self._pairs, pieces[: len(self._pairs)]):
                da, db = hadamard_backward(fv[a], fv[b], g)
                dfv[a] += da
                dfv[b] += db
            for f, g in zip(self._first_order, pieces[len(self._pairs) :]):
                dfv[f] += g
        else:
            for f in self._first_order:
                w = self.fo_weights[f]
                w.add_grad(fv[f].T @ dscores)
                dfv[f] += dscores[:, None] * w.value
            for (a, b) in self._pairs:
                r = self.pair_weights[(a, b)]
                dots = np.sum(fv[a] * fv[b], axis=1)
                r.add_grad(np.array(dscores @ dots))
                dfv[a] += dscores[:, None] * r.value * fv[b]
                dfv[b] += dscores[:, None] * r.value * fv[a]

        self.encode_backward(enc_cache, dfv)

    # ---- fwfm component view --------------------------------------------

    def component_names(self) -> list[str]:
        if self.config.architecture != "fwfm":
            raise UsageError("component scores exist only for the fwfm architecture")
        return [f for f in self._first_order] + [f"{a}-{b}" for a, b in self._pairs]

    def _fwfm_components(self, fv: dict[str, np.ndarray]) -> np.ndarray:
        cols = [fv[f] @ self.fo_weights[f].value for f in self._first_order]
        cols += [
            float(self.pair_weights[(a, b)].value) * np.sum(fv[a] * fv[b], axis=1)
            for a, b in self._pairs
        ]
        if not cols:
            raise ConfigError("fwfm has neither first-order terms nor interaction pairs")
        return np.stack(cols, axis=1)

    def component_scores(self, batch: ItemBatch) -> np.ndarray:
        """Per-item additive components, (B, n_components); they sum to the score."""
        if self.config.architecture != "fwfm":
            raise UsageError("component scores exist only for the fwfm architecture")
        fv, _ = self.encode_fields(batch)
        return self._fwfm_components(fv)

    # ---- convenience ----------------------------------------------------

    def score_items(self, items: list[tuple[IndexedGroup, int]]) -> np.ndarray:
        scores, _ = self.forward(make_item_batch(items))
        return scores

    def n_parameters(self) -> int:
        return self.store.total_size()


def score_groups(
    model: RankingModel, groups: list[IndexedGroup], batch_items: int = 4096
) -> list[np.ndarray]:
    """Score every document of every group, batched for throughput."""
    items = [(g, i) for g in groups for i in range(len(g.docs))]
    scores = np.empty(len(items))
    for start in range(0, len(items), batch_items):
        chunk = items[start : start + batch_items]
        scores[start : start + len(chunk)] = model.score_items(chunk)
    out = []
    off = 0
    for g in groups:
        out.append(scores[off : off + len(g.docs)].copy())
        off += len(g.docs)
    return out

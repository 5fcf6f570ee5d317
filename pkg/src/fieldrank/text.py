"""Text and category encoding: tokenization, vocabularies, embedding pooling.

Text fields share one embedding table and are encoded by averaging the
term vectors; the country code has its own small table. Vocabularies are
built from training partitions only, with index 0 reserved for
out-of-vocabulary tokens (and for unseen country codes).
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .data import DocumentRecord, QueryGroup
from .errors import ConfigError
from .ops import mean_pool

TEXT_FIELDS = ("query", "title", "description", "ingredients")

_SPLIT = re.compile(r"[\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on Unicode whitespace/punctuation, dropping empties."""
    return [t for t in _SPLIT.split(text.lower()) if t]


def document_tokens(doc: DocumentRecord) -> dict[str, list[str]]:
    """Tokens per text field of one document; ingredient entities are unioned."""
    ingredient_tokens: list[str] = []
    for entity in doc.ingredients:
        ingredient_tokens.extend(tokenize(entity))
    return {
        "title": tokenize(doc.title),
        "description": tokenize(doc.description),
        "ingredients": ingredient_tokens,
    }


@dataclass
class Vocabulary:
    """token -> dense index map with index 0 reserved for OOV."""

    index: dict[str, int]
    counts: dict[str, int]

    OOV = 0

    @property
    def size(self) -> int:
        return len(self.index) + 1

    def lookup(self, token: str) -> int:
        return self.index.get(token, self.OOV)

    def encode(self, tokens: list[str]) -> np.ndarray:
        return np.array([self.lookup(t) for t in tokens], dtype=np.int64)

    def dump(self, path) -> None:
        """Audit dump: token<TAB>index<TAB>count, one line per token."""
        with open(path, "w", encoding="utf-8") as f:
            for token, idx in self.index.items():
                f.write(f"{token}\t{idx}\t{self.counts[token]}\n")


def build_vocab(train_groups: list[QueryGroup], min_count: int = 2) -> Vocabulary:
    """Count tokens over queries and document text fields of the training groups.

    Indices are assigned by descending count, ties lexicographic, starting
    at 1; rebuilding on the same input gives the identical mapping.
    """
    if not train_groups:
        raise ConfigError("cannot build a vocabulary from an empty training set")
    counts: Counter[str] = Counter()
    for group in train_groups:
        counts.update(tokenize(group.query))
        for doc in group.documents:
            for toks in document_tokens(doc).values():
                counts.update(toks)
    kept = [(t, c) for t, c in counts.items() if c >= min_count]
    kept.sort(key=lambda tc: (-tc[1], tc[0]))
    index = {t: i + 1 for i, (t, _) in enumerate(kept)}
    return Vocabulary(index=index, counts={t: c for t, c in kept})


@dataclass
class CategoryTable:
    """country code -> dense index map with index 0 reserved for unknown."""

    index: dict[str, int]

    UNKNOWN = 0

    @property
    def size(self) -> int:
        return len(self.index) + 1

    def lookup(self, code: str) -> int:
        return self.index.get(code, self.UNKNOWN)


def build_categories(train_groups: list[QueryGroup]) -> CategoryTable:
    counts: Counter[str] = Counter()
    for group in train_groups:
        for doc in group.documents:
            counts[doc.country] += 1
    ordered = sorted(counts.items(), key=lambda tc: (-tc[1], tc[0]))
    return CategoryTable(index={c: i + 1 for i, (c, _) in enumerate(ordered)})


def encode_text_field(token_ids: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Average the embedding rows of the given tokens; empty input -> zeros.

    Token ids are sorted first so the encoding is bitwise permutation
    invariant (averaging makes order semantically irrelevant anyway).
    """
    if len(token_ids) == 0:
        return np.zeros(table.shape[1])
    return mean_pool(list(table[np.sort(token_ids)]))


def encode_category(code: str, categories: CategoryTable, table: np.ndarray) -> np.ndarray:
    return table[categories.lookup(code)].copy()


@dataclass
class EncodedDoc:
    """Per-field token index arrays for one document, under one vocabulary."""

    fields: dict[str, np.ndarray]
    country: int


@dataclass
class IndexedGroup:
    """A QueryGroup mapped to vocabulary indices, ready for batching."""

    query_ids: np.ndarray
    docs: list[EncodedDoc]
    labels: np.ndarray
    event_id: int


def index_group(group: QueryGroup, vocab: Vocabulary, categories: CategoryTable) -> IndexedGroup:
    docs = []
    for doc in group.documents:
        toks = document_tokens(doc)
        docs.append(
            EncodedDoc(
                fields={f: vocab.encode(toks[f]) for f in ("title", "description", "ingredients")},
                country=categories.lookup(doc.country),
            )
        )
    return IndexedGroup(
        query_ids=vocab.encode(tokenize(group.query)),
        docs=docs,
        labels=np.asarray(group.labels, dtype=np.int64),
        event_id=group.event_id,
    )


def index_groups(
    groups: list[QueryGroup], vocab: Vocabulary, categories: CategoryTable
) -> list[IndexedGroup]:
    return [index_group(g, vocab, categories) for g in groups]


@dataclass
class TokenBatch:
    """Padded (B, L) index matrix with a 0/1 mask and per-row counts."""

    ids: np.ndarray
    mask: np.ndarray
    counts: np.ndarray

    @classmethod
    def from_lists(cls, id_lists: list[np.ndarray]) -> "TokenBatch":
        b = len(id_lists)
        width = max((len(ids) for ids in id_lists), default=0)
        width = max(width, 1)  # keep shapes valid when every row is empty
        ids = np.zeros((b, width), dtype=np.int64)
        mask = np.zeros((b, width))
        for i, row in enumerate(id_lists):
            ids[i, : len(row)] = np.sort(row)  # canonical order: pooling averages
            mask[i, : len(row)] = 1.0
        return cls(ids=ids, mask=mask, counts=mask.sum(axis=1))


def pooled_embedding_forward(table: np.ndarray, batch: TokenBatch):
    """Masked mean of embedding rows: (B, L) indices -> (B, d) vectors.

    Rows with no tokens come out as zero vectors.
    """
    rows = table[batch.ids]  # (B, L, d)
    denom = np.maximum(batch.counts, 1.0)
    pooled = (rows * batch.mask[:, :, None]).sum(axis=1) / denom[:, None]
    return pooled


def pooled_embedding_backward(grad_table: np.ndarray, batch: TokenBatch, dout: np.ndarray) -> None:
    """Scatter d(pooled)/d(table): each contributing row gets dout/count."""
    denom = np.maximum(batch.counts, 1.0)
    weights = batch.mask / denom[:, None]  # (B, L)
    contrib = dout[:, None, :] * weights[:, :, None]  # (B, L, d)
    np.add.at(grad_table, batch.ids.reshape(-1), contrib.reshape(-1, dout.shape[1]))

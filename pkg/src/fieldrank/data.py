"""Click-log ingestion: documents, search events, labeled query groups, folds.

Labeling follows the trim-at-click rule: the fetched result list is cut at
the clicked position, the clicked document gets label 1 and everything
before it gets label 0. A query group is therefore guaranteed to have its
single positive at the last index.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

from .errors import ConfigError, ParseError

UNKNOWN_COUNTRY = "ZZ"

LOG_COLUMNS = [
    "session_id",
    "query",
    "page",
    "recipe_id",
    "position",
    "fetched_recipe_ids",
    "total_hits",
    "timestamp",
]


@dataclass
class DocumentRecord:
    recipe_id: int
    title: str
    description: str = ""
    ingredients: tuple[str, ...] = ()
    country: str = UNKNOWN_COUNTRY


@dataclass
class SearchEvent:
    session_id: int
    query: str
    page: int
    recipe_id: int
    position: int
    fetched_recipe_ids: tuple[int, ...]
    total_hits: int
    timestamp: int


@dataclass
class QueryGroup:
    """One query with its trimmed candidate list and binary labels."""

    query: str
    documents: list[DocumentRecord]
    labels: list[int]
    event_id: int
    timestamp: int

    @property
    def size(self) -> int:
        return len(self.documents)

    @property
    def is_single_doc(self) -> bool:
        return len(self.documents) < 2


@dataclass
class Fold:
    train: list[QueryGroup]
    validation: list[QueryGroup]


@dataclass
class FoldSet:
    folds: list[Fold]

    def __len__(self) -> int:
        return len(self.folds)

    def __iter__(self):
        return iter(self.folds)


@dataclass
class IngestLog:
    """Counts plus one plain-text line per reject/warning incident."""

    rejected_documents: int = 0
    duplicate_documents: int = 0
    rejected_events: int = 0
    dropped_groups: int = 0
    dropped_documents: int = 0
    position_mismatches: int = 0
    lines: list[str] = field(default_factory=list)

    def incident(self, line: str) -> None:
        self.lines.append(line)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for line in self.lines:
                f.write(line + "\n")


def parse_documents(stream, log: IngestLog | None = None) -> dict[int, DocumentRecord]:
    """Parse JSON Lines document records into a corpus keyed by recipe_id.

    Records missing recipe_id or title are rejected and counted; missing
    optional fields get their documented defaults; a duplicate recipe_id is
    overwritten by the later record with a warning.
    """
    log = log if log is not None else IngestLog()
    corpus: dict[int, DocumentRecord] = {}
    for lineno, raw in enumerate(stream, start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as e:
            raise ParseError(f"documents line {lineno}: invalid JSON ({e.msg})") from e
        if not isinstance(obj, dict):
            raise ParseError(f"documents line {lineno}: expected an object")
        if "recipe_id" not in obj or "title" not in obj:
            log.rejected_documents += 1
            log.incident(f"documents line {lineno}: rejected, missing recipe_id or title")
            continue
        try:
            recipe_id = int(obj["recipe_id"])
        except (TypeError, ValueError):
            log.rejected_documents += 1
            log.incident(f"documents line {lineno}: rejected, non-integer recipe_id")
            continue
        ingredients = obj.get("ingredients") or []
        if isinstance(ingredients, str):
            ingredients = [ingredients]
        # entity sets are unordered; de-duplicate keeping first occurrence so
        # downstream token counts are deterministic
        seen: dict[str, None] = {}
        for ing in ingredients:
            seen.setdefault(str(ing), None)
        country = str(obj.get("country") or UNKNOWN_COUNTRY)
        record = DocumentRecord(
            recipe_id=recipe_id,
            title=str(obj["title"]),
            description=str(obj.get("description") or ""),
            ingredients=tuple(seen),
            country=country,
        )
        if recipe_id in corpus:
            log.duplicate_documents += 1
            log.incident(f"documents line {lineno}: duplicate recipe_id {recipe_id}, last wins")
        corpus[recipe_id] = record
    return corpus


def load_documents(path, log: IngestLog | None = None) -> dict[int, DocumentRecord]:
    with open(path, "r", encoding="utf-8") as f:
        return parse_documents(f, log)


def parse_search_log(stream, log: IngestLog | None = None) -> list[SearchEvent]:
    """Parse the search-log CSV into events.

    The fetched id list is a comma-joined quoted field. A missing timestamp
    column falls back to row order as temporal order (row index used as the
    timestamp), which is logged once.
    """
    log = log if log is not None else IngestLog()
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        return []
    header = [h.strip() for h in header]
    required = [c for c in LOG_COLUMNS if c != "timestamp"]
    missing = [c for c in required if c not in header]
    if missing:
        raise ParseError(f"search log header is missing columns: {missing}")
    has_timestamp = "timestamp" in header
    if not has_timestamp:
        log.incident("search log has no timestamp column; using row order as temporal order")
    col = {name: header.index(name) for name in header}

    events: list[SearchEvent] = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            fetched = tuple(
                int(x) for x in str(row[col["fetched_recipe_ids"]]).split(",") if x.strip()
            )
            event = SearchEvent(
                session_id=int(row[col["session_id"]]),
                query=str(row[col["query"]]),
                page=int(row[col["page"]]),
                recipe_id=int(row[col["recipe_id"]]),
                position=int(row[col["position"]]),
                fetched_recipe_ids=fetched,
                total_hits=int(row[col["total_hits"]]),
                timestamp=int(row[col["timestamp"]]) if has_timestamp else lineno - 2,
            )
        except (ValueError, IndexError) as e:
            raise ParseError(f"search log line {lineno}: {e}") from e
        events.append(event)
    return events


def load_search_log(path, log: IngestLog | None = None) -> list[SearchEvent]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return parse_search_log(f, log)


def build_query_groups(
    events: list[SearchEvent],
    corpus: dict[int, DocumentRecord],
    log: IngestLog | None = None,
) -> list[QueryGroup]:
    """Apply the trim-at-click rule to every event.

    The first `position` fetched ids become the group; the last one (the
    click) gets label 1. Ids absent from the corpus are dropped; if the
    clicked one is missing the whole group is dropped and counted. Events
    with an out-of-range position are rejected.
    """
    log = log if log is not None else IngestLog()
    groups: list[QueryGroup] = []
    for idx, event in enumerate(events):
        n = len(event.fetched_recipe_ids)
        if n == 0 or event.position < 1 or event.position > n:
            log.rejected_events += 1
            log.incident(
                f"event {idx} (session {event.session_id}): rejected, "
                f"position {event.position} out of range for {n} fetched ids"
            )
            continue
        prefix = event.fetched_recipe_ids[: event.position]
        clicked_id = prefix[-1]
        if clicked_id != event.recipe_id:
            log.position_mismatches += 1
            log.incident(
                f"event {idx} (session {event.session_id}): recipe_id {event.recipe_id} "
                f"differs from id at position ({clicked_id}); trusting position"
            )
        if clicked_id not in corpus:
            log.dropped_groups += 1
            log.incident(
                f"event {idx} (session {event.session_id}): dropped, "
                f"clicked recipe {clicked_id} not in corpus"
            )
            continue
        docs: list[DocumentRecord] = []
        for rid in prefix[:-1]:
            if rid in corpus:
                docs.append(corpus[rid])
            else:
                log.dropped_documents += 1
        docs.append(corpus[clicked_id])
        labels = [0] * (len(docs) - 1) + [1]
        groups.append(
            QueryGroup(
                query=event.query,
                documents=docs,
                labels=labels,
                event_id=idx,
                timestamp=event.timestamp,
            )
        )
    return groups


def temporal_split(
    groups: list[QueryGroup], n_folds: int = 10, train_fraction: float = 0.75
) -> FoldSet:
    """Sort by timestamp and carve contiguous folds, each split 75/25 in time.

    The remainder of an uneven division goes to the earliest folds. Ties in
    timestamp break by source event id, so a shuffled input produces exactly
    the same FoldSet as a sorted one.
    """
    if len(groups) < 4 * n_folds:
        raise ConfigError(
            f"need at least {4 * n_folds} groups for {n_folds} folds, got {len(groups)}"
        )
    ordered = sorted(groups, key=lambda g: (g.timestamp, g.event_id))
    base, extra = divmod(len(ordered), n_folds)
    folds: list[Fold] = []
    start = 0
    for i in range(n_folds):
        size = base + (1 if i < extra else 0)
        block = ordered[start : start + size]
        start += size
        n_train = math.ceil(train_fraction * len(block))
        folds.append(Fold(train=block[:n_train], validation=block[n_train:]))
    return FoldSet(folds)


def pipeline_stats(groups: list[QueryGroup], foldset: FoldSet | None = None) -> dict:
    """Deterministic ingest summary for the experiment report."""
    summary = {
        "groups": len(groups),
        "documents": sum(g.size for g in groups),
        "positives": sum(sum(g.labels) for g in groups),
        "single_doc_groups": sum(1 for g in groups if g.is_single_doc),
    }
    if foldset is not None:
        summary["folds"] = [
            {
                "train": len(f.train),
                "validation": len(f.validation),
                "min_timestamp": min(g.timestamp for g in f.train + f.validation),
                "max_timestamp": max(g.timestamp for g in f.train + f.validation),
            }
            for f in foldset
        ]
    return summary

"""Synthetic click-log generator with a controllable, known click model.

Each event picks a target document, samples the query from its title,
assembles a fetched list containing the target, and clicks the document
maximizing

    overlap_weight * |query tokens in title|  +  country_weight * popularity

with probability 1 - noise (otherwise a uniformly random list position).
Titles carry the query signal; descriptions and ingredients are random
token fields uncorrelated with clicks, so they act as noise fields.
Country popularity is a fixed descending ramp recorded in the manifest,
which makes a first-order country feature informative whenever
country_weight > 0.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError


@dataclass
class SynthSpec:
    vocab_size: int = 150
    n_documents: int = 600
    n_queries: int = 2000
    n_countries: int = 6
    list_len_min: int = 4
    list_len_max: int = 10
    title_len: tuple[int, int] = (3, 6)
    description_len: tuple[int, int] = (0, 8)
    ingredients_len: tuple[int, int] = (2, 6)
    query_len_max: int = 3
    overlap_weight: float = 1.0
    country_weight: float = 0.0
    noise: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        if not (0.0 <= self.noise < 1.0):
            raise ConfigError(f"noise must be in [0, 1), got {self.noise}")
        if self.list_len_max > self.n_documents:
            raise ConfigError(
                f"list length {self.list_len_max} exceeds document count {self.n_documents}"
            )
        if self.list_len_min < 1 or self.list_len_min > self.list_len_max:
            raise ConfigError("list length bounds are inconsistent")
        if min(self.vocab_size, self.n_documents, self.n_queries, self.n_countries) < 1:
            raise ConfigError("counts must be positive")
        if self.title_len[0] < 1:
            raise ConfigError("titles need at least one token")
        for lo, hi in (self.title_len, self.description_len, self.ingredients_len):
            if lo > hi:
                raise ConfigError("length bounds are inconsistent")
        if self.title_len[1] > self.vocab_size or self.ingredients_len[1] > self.vocab_size:
            raise ConfigError("distinct-token field length exceeds vocabulary size")
        if not (
            np.isfinite(self.overlap_weight)
            and np.isfinite(self.country_weight)
        ):
            raise ConfigError("click-model weights must be finite")
        if self.query_len_max < 1:
            raise ConfigError("queries need at least one token")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown synth spec keys: {sorted(unknown)}")
        kwargs = dict(d)
        for key in ("title_len", "description_len", "ingredients_len"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        spec = cls(**kwargs)
        spec.validate()
        return spec


def country_popularity(n_countries: int) -> np.ndarray:
    """Fixed descending per-country utility ramp in (0, 1]."""
    return 1.0 - np.arange(n_countries) / n_countries


def _sample_len(rng: np.random.Generator, bounds: tuple[int, int]) -> int:
    lo, hi = bounds
    return int(rng.integers(lo, hi + 1))


def generate(spec: SynthSpec, docs_path, logs_path, manifest_path) -> dict:
    """Write documents (JSON Lines), a search log (CSV) and the ground-truth
    manifest. Byte-identical for identical specs."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    tokens = [f"w{i:03d}" for i in range(spec.vocab_size)]
    countries = [f"c{i:02d}" for i in range(spec.n_countries)]
    popularity = country_popularity(spec.n_countries)

    titles: list[np.ndarray] = []
    doc_countries: list[int] = []
    with open(docs_path, "w", encoding="utf-8") as f:
        for rid in range(1, spec.n_documents + 1):
            title_ids = rng.choice(spec.vocab_size, size=_sample_len(rng, spec.title_len), replace=False)
            desc_ids = rng.integers(0, spec.vocab_size, size=_sample_len(rng, spec.description_len))
            ingr_ids = rng.choice(
                spec.vocab_size, size=_sample_len(rng, spec.ingredients_len), replace=False
            )
            country = int(rng.integers(spec.n_countries))
            titles.append(title_ids)
            doc_countries.append(country)
            record = {
                "recipe_id": rid,
                "title": " ".join(tokens[i] for i in title_ids),
                "description": " ".join(tokens[i] for i in desc_ids),
                "ingredients": [tokens[i] for i in ingr_ids],
                "country": countries[country],
            }
            f.write(json.dumps(record, sort_keys=True) + "\n")

    n_events = 0
    click_positions = np.zeros(spec.list_len_max, dtype=np.int64)
    with open(logs_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(
            [
                "session_id",
                "query",
                "page",
                "recipe_id",
                "position",
                "fetched_recipe_ids",
                "total_hits",
                "timestamp",
            ]
        )
        for qi in range(spec.n_queries):
            target = int(rng.integers(spec.n_documents))
            title = titles[target]
            q_len = int(rng.integers(1, min(spec.query_len_max, len(title)) + 1))
            query_ids = rng.choice(title, size=q_len, replace=False)
            query_set = set(int(t) for t in query_ids)

            list_len = int(rng.integers(spec.list_len_min, spec.list_len_max + 1))
            others = rng.choice(spec.n_documents - 1, size=list_len - 1, replace=False)
            others = np.where(others >= target, others + 1, others)  # skip the target slot
            fetched = np.concatenate([[target], others])
            rng.shuffle(fetched)

            utility = np.array(
                [
                    spec.overlap_weight * len(query_set.intersection(int(t) for t in titles[d]))
                    + spec.country_weight * popularity[doc_countries[d]]
                    for d in fetched
                ]
            )
            if rng.random() < spec.noise:
                clicked = int(rng.integers(list_len))
            else:
                clicked = int(np.argmax(utility))
            click_positions[clicked] += 1

            writer.writerow(
                [
                    qi + 1,
                    " ".join(tokens[int(t)] for t in query_ids),
                    1,
                    int(fetched[clicked]) + 1,
                    clicked + 1,
                    ",".join(str(int(d) + 1) for d in fetched),
                    list_len,
                    1_600_000_000_000 + qi * 60_000,
                ]
            )
            n_events += 1

    manifest = {
        "spec": asdict(spec),
        "country_popularity": [float(p) for p in popularity],
        "countries": countries,
        "n_events": n_events,
        "click_position_counts": click_positions.tolist(),
    }
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
        f.write("\n")
    return manifest

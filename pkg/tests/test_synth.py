import json

import numpy as np
import pytest

from fieldrank.data import IngestLog, build_query_groups, load_documents, load_search_log
from fieldrank.errors import ConfigError
from fieldrank.synth import SynthSpec, country_popularity, generate


def small_spec(**kwargs):
    defaults = dict(
        vocab_size=40,
        n_documents=60,
        n_queries=120,
        n_countries=4,
        list_len_min=4,
        list_len_max=6,
        seed=3,
    )
    defaults.update(kwargs)
    return SynthSpec(**defaults)


def run(spec, tmp_path, tag=""):
    docs = tmp_path / f"docs{tag}.jsonl"
    logs = tmp_path / f"logs{tag}.csv"
    manifest = tmp_path / f"manifest{tag}.json"
    generate(spec, docs, logs, manifest)
    return docs, logs, manifest


class TestSpecValidation:
    def test_list_longer_than_corpus_rejected(self):
        with pytest.raises(ConfigError):
            small_spec(n_documents=5, list_len_max=6).validate()

    def test_noise_range(self):
        with pytest.raises(ConfigError):
            small_spec(noise=1.0).validate()

    def test_from_dict_unknown_key(self):
        with pytest.raises(ConfigError):
            SynthSpec.from_dict({"vocab_size": 10, "wat": 1})

    def test_popularity_descends(self):
        pop = country_popularity(5)
        assert np.all(np.diff(pop) < 0)
        assert pop[0] == 1.0


class TestGeneration:
    def test_files_parse_through_the_pipeline(self, tmp_path):
        docs_path, logs_path, manifest_path = run(small_spec(), tmp_path)
        log = IngestLog()
        corpus = load_documents(docs_path, log)
        events = load_search_log(logs_path, log)
        groups = build_query_groups(events, corpus, log)
        assert len(corpus) == 60
        assert len(events) == 120
        assert len(groups) == 120
        assert log.rejected_events == 0 and log.rejected_documents == 0
        for g in groups:
            assert g.labels[-1] == 1 and sum(g.labels) == 1
        manifest = json.loads(manifest_path.read_text())
        assert manifest["n_events"] == 120

    def test_same_seed_is_byte_identical(self, tmp_path):
        a = run(small_spec(), tmp_path, "a")
        b = run(small_spec(), tmp_path, "b")
        for fa, fb in zip(a, b):
            assert fa.read_bytes() == fb.read_bytes()

    def test_different_seed_differs(self, tmp_path):
        a = run(small_spec(), tmp_path, "a")
        b = run(small_spec(seed=4), tmp_path, "b")
        assert a[1].read_bytes() != b[1].read_bytes()

    def test_zero_noise_clicks_maximal_overlap(self, tmp_path):
        spec = small_spec(noise=0.0, country_weight=0.0, n_queries=200)
        docs_path, logs_path, _ = run(spec, tmp_path)
        corpus = load_documents(docs_path)
        events = load_search_log(logs_path)
        title_tokens = {rid: set(doc.title.split(" ")) for rid, doc in corpus.items()}
        for e in events:
            q = set(e.query.split(" "))
            overlaps = [len(q & title_tokens[rid]) for rid in e.fetched_recipe_ids]
            assert overlaps[e.position - 1] == max(overlaps)

    def test_high_noise_clicks_approximately_uniform(self, tmp_path):
        # chi-square sanity on the clicked position under near-total noise
        spec = small_spec(noise=0.99, n_queries=8000, list_len_min=6, list_len_max=6, seed=0)
        _, logs_path, _ = run(spec, tmp_path)
        events = load_search_log(logs_path)
        counts = np.zeros(6)
        for e in events:
            counts[e.position - 1] += 1
        expected = len(events) / 6.0
        chi2 = float(np.sum((counts - expected) ** 2 / expected))
        from scipy import stats

        p = float(stats.chi2.sf(chi2, df=5))
        assert p > 0.01

    def test_timestamps_strictly_increase(self, tmp_path):
        _, logs_path, _ = run(small_spec(), tmp_path)
        events = load_search_log(logs_path)
        ts = [e.timestamp for e in events]
        assert all(b > a for a, b in zip(ts, ts[1:]))

    def test_country_weight_prefers_popular_countries(self, tmp_path):
        spec = small_spec(
            overlap_weight=0.0, country_weight=2.0, noise=0.0, n_queries=400, seed=1
        )
        docs_path, logs_path, _ = run(spec, tmp_path)
        corpus = load_documents(docs_path)
        events = load_search_log(logs_path)
        popularity = country_popularity(spec.n_countries)
        order = {f"c{i:02d}": popularity[i] for i in range(spec.n_countries)}
        for e in events:
            clicked = corpus[e.recipe_id]
            best = max(order[corpus[r].country] for r in e.fetched_recipe_ids)
            assert order[clicked.country] == best

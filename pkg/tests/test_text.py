import numpy as np
import pytest

import helpers
from fieldrank.errors import ConfigError
from fieldrank.text import (
    CategoryTable,
    TokenBatch,
    Vocabulary,
    build_categories,
    build_vocab,
    encode_category,
    encode_text_field,
    index_groups,
    pooled_embedding_forward,
    tokenize,
)


class TestTokenize:
    def test_title_example(self):
        assert tokenize("Honey garlic chicken thighs") == ["honey", "garlic", "chicken", "thighs"]

    def test_empty(self):
        assert tokenize("") == []

    def test_collapses_whitespace(self):
        assert tokenize("hot  dessert") == ["hot", "dessert"]

    def test_punctuation_and_underscore_split(self):
        assert tokenize("salt, pepper_mix!") == ["salt", "pepper", "mix"]

    def test_deterministic(self):
        s = "Crushed red chilli; chicken & salt"
        assert tokenize(s) == tokenize(s)


class TestVocabulary:
    def make_groups(self, texts):
        corpus = helpers.make_corpus(n_docs=5)
        groups = helpers.make_groups(corpus, n_groups=4)
        for g, t in zip(groups, texts):
            g.query = t
        return groups

    def test_min_count_filters(self):
        groups = self.make_groups(["a a a", "a b", "", ""])
        # remove document text influence by blanking the docs
        for g in groups:
            for d in g.documents:
                d.title = ""
                d.description = ""
                d.ingredients = ()
        vocab = build_vocab(groups, min_count=2)
        assert vocab.lookup("a") == 1
        assert vocab.lookup("b") == Vocabulary.OOV
        assert vocab.size == 2

        vocab1 = build_vocab(groups, min_count=1)
        assert vocab1.lookup("a") == 1 and vocab1.lookup("b") == 2

    def test_index_order_by_count_then_lexicographic(self):
        groups = self.make_groups(["b b c c a a a", "", "", ""])
        for g in groups:
            for d in g.documents:
                d.title = ""
                d.description = ""
                d.ingredients = ()
        vocab = build_vocab(groups, min_count=1)
        assert vocab.index == {"a": 1, "b": 2, "c": 3}

    def test_rebuild_identical(self):
        corpus = helpers.make_corpus()
        groups = helpers.make_groups(corpus, n_groups=30)
        assert build_vocab(groups, 2).index == build_vocab(groups, 2).index

    def test_empty_training_set_rejected(self):
        with pytest.raises(ConfigError):
            build_vocab([], 2)

    def test_validation_text_never_inspected(self):
        corpus = helpers.make_corpus()
        groups = helpers.make_groups(corpus, n_groups=60)
        train, val = groups[:40], groups[40:]
        before = build_vocab(train, 2).index
        for g in val:
            g.query = "zzz zzz zzz zzz"
        assert build_vocab(train, 2).index == before

    def test_dump_format(self, tmp_path):
        corpus = helpers.make_corpus()
        groups = helpers.make_groups(corpus, n_groups=10)
        vocab = build_vocab(groups, min_count=2)
        path = tmp_path / "vocab.tsv"
        vocab.dump(path)
        lines = path.read_text().strip().split("\n")
        assert len(lines) == vocab.size - 1
        token, idx, count = lines[0].split("\t")
        assert vocab.index[token] == int(idx)
        assert vocab.counts[token] == int(count)


class TestEncoding:
    def test_average_of_term_vectors(self):
        table = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        out = encode_text_field(np.array([1, 2]), table)
        assert np.array_equal(out, [0.5, 0.5])

    def test_empty_tokens_give_zero_vector(self):
        table = np.ones((3, 4))
        assert np.array_equal(encode_text_field(np.array([], dtype=int), table), np.zeros(4))

    def test_oov_uses_row_zero(self):
        table = np.array([[7.0, 7.0], [1.0, 1.0]])
        vocab = Vocabulary(index={"known": 1}, counts={"known": 1})
        ids = vocab.encode(["unknown"])
        assert np.array_equal(encode_text_field(ids, table), [7.0, 7.0])

    def test_permutation_invariance_bitwise(self):
        rng = np.random.default_rng(0)
        table = rng.normal(size=(30, 8))
        ids = rng.integers(0, 30, size=12)
        perm = rng.permutation(ids)
        assert np.array_equal(encode_text_field(ids, table), encode_text_field(perm, table))

    def test_category_lookup(self):
        table = np.array([[0.0, 0.0], [0.5, 0.5]])
        cats = CategoryTable(index={"GB": 1})
        assert np.array_equal(encode_category("GB", cats, table), [0.5, 0.5])
        assert np.array_equal(encode_category("ZZ", cats, table), [0.0, 0.0])
        assert np.array_equal(
            encode_category("GB", cats, table), encode_category("GB", cats, table)
        )

    def test_batched_pooling_matches_single(self):
        rng = np.random.default_rng(2)
        table = rng.normal(size=(20, 5))
        lists = [rng.integers(0, 20, size=rng.integers(0, 6)) for _ in range(8)]
        batch = TokenBatch.from_lists(lists)
        pooled = pooled_embedding_forward(table, batch)
        for i, ids in enumerate(lists):
            np.testing.assert_allclose(pooled[i], encode_text_field(ids, table), atol=1e-12)


class TestIndexing:
    def test_groups_index_against_vocab(self):
        corpus = helpers.make_corpus()
        groups = helpers.make_groups(corpus, n_groups=20)
        vocab = build_vocab(groups, min_count=1)
        cats = build_categories(groups)
        indexed = index_groups(groups, vocab, cats)
        assert len(indexed) == len(groups)
        for g, ig in zip(groups, indexed):
            assert len(ig.docs) == len(g.documents)
            assert np.array_equal(ig.labels, g.labels)
            assert all(0 <= d.country < cats.size for d in ig.docs)

    def test_category_unknown_reserved(self):
        corpus = helpers.make_corpus()
        groups = helpers.make_groups(corpus, n_groups=10)
        cats = build_categories(groups)
        assert cats.lookup("never-seen") == CategoryTable.UNKNOWN

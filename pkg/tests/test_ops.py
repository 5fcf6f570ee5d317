import numpy as np
import pytest

from fieldrank.errors import ShapeError, UsageError
from fieldrank.ops import (
    DenseLayer,
    MLP,
    concat,
    concat_backward,
    cosine_similarity,
    cosine_similarity_backward,
    dot_product,
    dot_product_backward,
    hadamard,
    hadamard_backward,
    mean_pool,
    mean_pool_backward,
    sigmoid,
)
from fieldrank.params import ParamStore


def make_dense(w, b, activation):
    store = ParamStore()
    return DenseLayer(
        store.create("w", np.asarray(w, dtype=float)),
        store.create("b", np.asarray(b, dtype=float)),
        activation,
    )


class TestDense:
    def test_identity_map(self):
        layer = make_dense([[1, 0], [0, 1]], [0, 0], "identity")
        y, _ = layer.forward(np.array([3.0, 4.0]))
        assert np.array_equal(y, [3.0, 4.0])

    def test_relu_clips_negative_preactivation(self):
        layer = make_dense([[1, 1]], [-2], "relu")
        y, _ = layer.forward(np.array([1.0, 0.5]))
        assert np.array_equal(y, [0.0])

    def test_sigmoid_at_zero(self):
        layer = make_dense([[1]], [0], "sigmoid")
        y, _ = layer.forward(np.array([0.0]))
        assert y[0] == 0.5

    def test_dimension_mismatch_names_both_dimensions(self):
        layer = make_dense([[1, 0], [0, 1]], [0, 0], "identity")
        with pytest.raises(ShapeError, match="2"):
            layer.forward(np.zeros(3))

    def test_unknown_activation_rejected(self):
        with pytest.raises(UsageError):
            make_dense([[1]], [0], "tanh")

    def test_batched_forward_matches_per_row(self):
        # batched matmul may take a different BLAS path, so compare tightly
        # rather than bitwise
        rng = np.random.default_rng(0)
        layer = make_dense(rng.normal(size=(3, 4)), rng.normal(size=3), "relu")
        x = rng.normal(size=(5, 4))
        y, _ = layer.forward(x)
        for i in range(5):
            yi, _ = layer.forward(x[i])
            np.testing.assert_allclose(y[i], yi, rtol=1e-12, atol=1e-14)


class TestHadamard:
    def test_elementwise_definition(self):
        assert np.array_equal(hadamard([1, 2, 3], [4, 5, 6]), [4, 10, 18])

    def test_ones_is_identity(self):
        a = np.array([1.5, -2.0, 0.25])
        assert np.array_equal(hadamard(a, np.ones(3)), a)

    def test_zeros_absorb(self):
        assert np.array_equal(hadamard([1.0, 2.0], np.zeros(2)), np.zeros(2))

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            hadamard([1, 2], [1, 2, 3])

    def test_backward_routes_cross_terms(self):
        a, b, g = np.array([1.0, 2.0]), np.array([3.0, 4.0]), np.array([0.5, 0.25])
        da, db = hadamard_backward(a, b, g)
        assert np.array_equal(da, g * b)
        assert np.array_equal(db, g * a)


class TestDot:
    def test_unit_vector(self):
        assert dot_product([1.0, 0.0], [1.0, 0.0]) == 1.0

    def test_orthogonal(self):
        assert dot_product([1.0, 2.0], [-2.0, 1.0]) == 0.0

    def test_arithmetic(self):
        assert dot_product([1.0, 2.0, 3.0], [4.0, 5.0, 6.0]) == 32.0

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            dot_product([1.0], [1.0, 2.0])

    def test_backward(self):
        a, b = np.array([1.0, 2.0]), np.array([3.0, 4.0])
        da, db = dot_product_backward(a, b, 2.0)
        assert np.array_equal(da, 2.0 * b)
        assert np.array_equal(db, 2.0 * a)


class TestMeanPool:
    def test_average_definition(self):
        assert np.array_equal(mean_pool([[1.0, 0.0], [0.0, 1.0]]), [0.5, 0.5])

    def test_singleton(self):
        assert np.array_equal(mean_pool([[2.0, 2.0]]), [2.0, 2.0])

    def test_empty_list_pools_to_zero_vector(self):
        assert np.array_equal(mean_pool([], dim=3), np.zeros(3))

    def test_empty_without_dim_rejected(self):
        with pytest.raises(UsageError):
            mean_pool([])

    def test_inconsistent_rows(self):
        with pytest.raises(ShapeError):
            mean_pool([[1.0, 2.0], [1.0]])

    def test_n_copies_is_exact_identity(self):
        rng = np.random.default_rng(3)
        v = rng.normal(size=7)
        for n in (1, 2, 5, 8):
            assert np.array_equal(mean_pool([v] * n), v)

    def test_backward_splits_gradient_equally(self):
        g = np.array([0.3, -0.6])
        shares = mean_pool_backward(g, 3)
        assert len(shares) == 3
        for s in shares:
            assert np.array_equal(s, g / 3)


class TestConcat:
    def test_definition(self):
        assert np.array_equal(concat([[1.0], [2.0, 3.0]]), [1.0, 2.0, 3.0])

    def test_singleton_identity(self):
        x = np.array([4.0, 5.0])
        assert np.array_equal(concat([x]), x)

    def test_length_additivity(self):
        vs = [np.zeros(4) for _ in range(4)]
        assert concat(vs).shape == (16,)

    def test_empty_list_rejected(self):
        with pytest.raises(UsageError):
            concat([])

    def test_slice_backward_is_exact_inverse_routing(self):
        rng = np.random.default_rng(1)
        pieces = [rng.normal(size=s) for s in (2, 5, 1, 3)]
        g = rng.normal(size=11)
        back = concat_backward(g, [2, 5, 1, 3])
        off = 0
        for piece, grad in zip(pieces, back):
            assert np.array_equal(grad, g[off : off + len(piece)])
            off += len(piece)


class TestCosine:
    def test_equal_vectors(self):
        v = np.array([1.0, 2.0, 2.0])
        c, _ = cosine_similarity(v, v)
        assert c == pytest.approx(1.0)

    def test_orthogonal(self):
        c, _ = cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 3.0]))
        assert c == 0.0

    def test_antipodal(self):
        v = np.array([0.5, -1.5])
        c, _ = cosine_similarity(v, -v)
        assert c == pytest.approx(-1.0)

    def test_zero_norm_convention(self):
        c, cache = cosine_similarity(np.zeros(3), np.array([1.0, 0.0, 0.0]))
        assert c == 0.0
        du, dv = cosine_similarity_backward(cache, 1.0)
        assert np.array_equal(du, np.zeros(3))
        assert np.array_equal(dv, np.zeros(3))

    def test_range_bounded(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            u, v = rng.normal(size=4), rng.normal(size=4)
            c, _ = cosine_similarity(u, v)
            assert -1.0 - 1e-12 <= c <= 1.0 + 1e-12


def test_sigmoid_is_stable_at_extremes():
    big = sigmoid(np.array([1000.0, -1000.0, 0.0]))
    assert np.all(np.isfinite(big))
    assert big[0] == 1.0 and big[1] == 0.0 and big[2] == 0.5


def test_forward_passes_finite_on_finite_inputs():
    rng = np.random.default_rng(9)
    store = ParamStore()
    mlp = MLP.create(store, "m", rng, 6, (8, 8), 1)
    for _ in range(20):
        y, _ = mlp.forward(rng.normal(scale=100.0, size=(7, 6)))
        assert np.all(np.isfinite(y))

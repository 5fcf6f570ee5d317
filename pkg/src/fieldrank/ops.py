"""Dense numerical kernels with explicit forward and backward passes.

Every kernel is a plain function or a small layer object: forward returns
the output plus whatever the matching backward needs, and backward routes
the incoming gradient by hand. There is no tape; the scoring architectures
are fixed feedforward shapes, so the wiring is done once per model.

Inputs may be single vectors of shape (d,) or batches of shape (B, d);
batched forms are used everywhere in training.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError, UsageError
from .params import Parameter, ParamStore

ACTIVATIONS = ("identity", "relu", "sigmoid")


def sigmoid(x):
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _activate(z: np.ndarray, tag: str) -> np.ndarray:
    if tag == "identity":
        return z
    if tag == "relu":
        return np.maximum(z, 0.0)
    if tag == "sigmoid":
        return sigmoid(z)
    raise UsageError(f"unknown activation '{tag}', expected one of {ACTIVATIONS}")


def _activate_grad(z: np.ndarray, y: np.ndarray, tag: str) -> np.ndarray:
    if tag == "identity":
        return np.ones_like(z)
    if tag == "relu":
        return (z > 0.0).astype(np.float64)
    if tag == "sigmoid":
        return y * (1.0 - y)
    raise UsageError(f"unknown activation '{tag}', expected one of {ACTIVATIONS}")


def glorot_uniform(rng: np.random.Generator, out_dim: int, in_dim: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (in_dim + out_dim))
    return rng.uniform(-limit, limit, size=(out_dim, in_dim))


class DenseLayer:
    """Fully connected layer y = act(W x + b) with explicit gradients.

    weight and bias are Parameter objects owned by a ParamStore, so the
    optimizer sees gradients accumulated here.
    """

    def __init__(self, weight: Parameter, bias: Parameter, activation: str = "identity"):
        if activation not in ACTIVATIONS:
            raise UsageError(f"unknown activation '{activation}', expected one of {ACTIVATIONS}")
        if weight.value.ndim != 2:
            raise ShapeError(f"dense weight must be 2-d, got shape {weight.value.shape}")
        if bias.value.shape != (weight.value.shape[0],):
            raise ShapeError(
                f"dense bias shape {bias.value.shape} does not match weight "
                f"out-dimension {weight.value.shape[0]}"
            )
        self.weight = weight
        self.bias = bias
        self.activation = activation

    @classmethod
    def create(
        cls,
        store: ParamStore,
        name: str,
        rng: np.random.Generator,
        in_dim: int,
        out_dim: int,
        activation: str = "identity",
    ) -> "DenseLayer":
        w = store.create(f"{name}.W", glorot_uniform(rng, out_dim, in_dim))
        b = store.create(f"{name}.b", np.zeros(out_dim))
        return cls(w, b, activation)

    @property
    def in_dim(self) -> int:
        return self.weight.value.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.value.shape[0]

    def forward(self, x: np.ndarray):
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        x2 = x[None, :] if squeeze else x
        if x2.ndim != 2 or x2.shape[1] != self.in_dim:
            raise ShapeError(
                f"dense layer expects input dimension {self.in_dim}, "
                f"got shape {x.shape}"
            )
        z = x2 @ self.weight.value.T + self.bias.value
        y = _activate(z, self.activation)
        cache = (x2, z, y, squeeze)
        return (y[0] if squeeze else y), cache

    def backward(self, cache, dy: np.ndarray) -> np.ndarray:
        x2, z, y, squeeze = cache
        dy = np.asarray(dy, dtype=np.float64)
        dy2 = dy[None, :] if squeeze else dy
        dz = dy2 * _activate_grad(z, y, self.activation)
        self.weight.add_grad(dz.T @ x2)
        self.bias.add_grad(dz.sum(axis=0))
        dx = dz @ self.weight.value
        return dx[0] if squeeze else dx


class MLP:
    """Stack of dense layers: relu on hidden layers, identity on the last."""

    def __init__(self, layers: list[DenseLayer]):
        self.layers = layers

    @classmethod
    def create(
        cls,
        store: ParamStore,
        name: str,
        rng: np.random.Generator,
        in_dim: int,
        widths: tuple[int, ...],
        out_dim: int = 1,
    ) -> "MLP":
        dims = [in_dim, *widths, out_dim]
        layers = []
        for i in range(len(dims) - 1):
            act = "relu" if i < len(dims) - 2 else "identity"
            layers.append(
                DenseLayer.create(store, f"{name}.{i}", rng, dims[i], dims[i + 1], act)
            )
        return cls(layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def forward(self, x: np.ndarray):
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        return x, caches

    def backward(self, caches, dy: np.ndarray) -> np.ndarray:
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            dy = layer.backward(cache, dy)
        return dy


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise product; gradient routing is g*b and g*a."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"hadamard operands differ in shape: {a.shape} vs {b.shape}")
    return a * b


def hadamard_backward(a: np.ndarray, b: np.ndarray, g: np.ndarray):
    return g * b, g * a


def dot_product(a: np.ndarray, b: np.ndarray):
    """Inner product along the last axis: scalar for vectors, (B,) for batches."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"dot operands differ in shape: {a.shape} vs {b.shape}")
    if a.ndim == 1:
        return float(a @ b)
    return np.sum(a * b, axis=-1)


def dot_product_backward(a: np.ndarray, b: np.ndarray, g):
    g = np.asarray(g, dtype=np.float64)
    if a.ndim == 1:
        return g * b, g * a
    return g[:, None] * b, g[:, None] * a


def mean_pool(rows, dim: int | None = None) -> np.ndarray:
    """Arithmetic mean of a list of equal-length vectors.

    An empty list pools to the zero vector, which requires `dim`; this is
    the convention for empty text fields. The mean is computed centered on
    the first row, which makes pooling n copies of a vector return that
    vector exactly.
    """
    rows = [np.asarray(r, dtype=np.float64) for r in rows]
    if not rows:
        if dim is None:
            raise UsageError("mean_pool of an empty list needs an explicit dimension")
        return np.zeros(dim)
    d = rows[0].shape
    for r in rows[1:]:
        if r.shape != d:
            raise ShapeError(f"mean_pool rows differ in shape: {d} vs {r.shape}")
    stacked = np.stack(rows, axis=0)
    return rows[0] + (stacked - rows[0]).sum(axis=0) / len(rows)


def mean_pool_backward(g: np.ndarray, n_rows: int) -> list[np.ndarray]:
    """Split an incoming gradient equally among the n contributing rows."""
    if n_rows == 0:
        return []
    share = np.asarray(g, dtype=np.float64) / n_rows
    return [share.copy() for _ in range(n_rows)]


def concat(vs) -> np.ndarray:
    """Concatenate vectors (or batches) along the last axis, in given order."""
    if not vs:
        raise UsageError("concat of an empty list")
    vs = [np.asarray(v, dtype=np.float64) for v in vs]
    return np.concatenate(vs, axis=-1)


def concat_backward(g: np.ndarray, sizes: list[int]) -> list[np.ndarray]:
    """Slice the gradient back into the original pieces (exact inverse routing)."""
    if sum(sizes) != g.shape[-1]:
        raise ShapeError(f"concat backward sizes {sizes} do not sum to {g.shape[-1]}")
    out = []
    off = 0
    for s in sizes:
        out.append(np.array(g[..., off : off + s]))
        off += s
    return out


def cosine_similarity(u: np.ndarray, v: np.ndarray):
    """Batched cosine similarity with the zero-norm-maps-to-0 convention.

    Returns (values, cache). Rows where either operand has zero norm get
    similarity 0 and propagate zero gradient.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ShapeError(f"cosine operands differ in shape: {u.shape} vs {v.shape}")
    squeeze = u.ndim == 1
    u2 = u[None, :] if squeeze else u
    v2 = v[None, :] if squeeze else v
    nu = np.linalg.norm(u2, axis=1)
    nv = np.linalg.norm(v2, axis=1)
    ok = (nu > 0.0) & (nv > 0.0)
    denom = np.where(ok, nu * nv, 1.0)
    c = np.where(ok, np.sum(u2 * v2, axis=1) / denom, 0.0)
    cache = (u2, v2, nu, nv, ok, c, squeeze)
    return (float(c[0]) if squeeze else c), cache


def cosine_similarity_backward(cache, dc):
    u2, v2, nu, nv, ok, c, squeeze = cache
    dc = np.asarray(dc, dtype=np.float64)
    dc2 = dc[None] if squeeze else dc
    safe_nu = np.where(ok, nu, 1.0)
    safe_nv = np.where(ok, nv, 1.0)
    scale = (dc2 * ok)[:, None]
    du = scale * (v2 / (safe_nu * safe_nv)[:, None] - (c / (safe_nu**2))[:, None] * u2)
    dv = scale * (u2 / (safe_nu * safe_nv)[:, None] - (c / (safe_nv**2))[:, None] * v2)
    if squeeze:
        return du[0], dv[0]
    return du, dv

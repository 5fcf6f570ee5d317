"""Named parameter tensors with gradient buffers, Adam state and checkpointing.

Everything is float64. A ParamStore is the single owner of all trainable
values of one model; layers hold references to Parameter objects so that
optimizer updates are visible everywhere without copying.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import ShapeError, UsageError

CHECKPOINT_MAGIC = b"FRCK0001"


class Parameter:
    """One named tensor plus its gradient buffer and Adam accumulators."""

    __slots__ = ("name", "value", "grad", "m", "v", "step", "grad_filled")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.m = np.zeros_like(self.value)
        self.v = np.zeros_like(self.value)
        self.step = 0
        self.grad_filled = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def add_grad(self, g: np.ndarray) -> None:
        g = np.asarray(g, dtype=np.float64)
        if g.shape != self.value.shape:
            raise ShapeError(
                f"gradient shape {g.shape} does not match parameter "
                f"'{self.name}' shape {self.value.shape}"
            )
        self.grad += g
        self.grad_filled = True

    def zero_grad(self) -> None:
        self.grad[...] = 0.0
        self.grad_filled = False


class ParamStore:
    """Ordered collection of uniquely named parameters."""

    def __init__(self):
        self._params: dict[str, Parameter] = {}

    def create(self, name: str, value: np.ndarray) -> Parameter:
        if name in self._params:
            raise UsageError(f"parameter '{name}' already exists")
        p = Parameter(name, value)
        self._params[name] = p
        return p

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def values(self):
        return self._params.values()

    def total_size(self) -> int:
        return sum(p.value.size for p in self._params.values())

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.zero_grad()

    def adam_step(
        self,
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        """Apply one bias-corrected Adam update and clear all gradients."""
        for name, p in self._params.items():
            if not p.grad_filled:
                raise UsageError(f"gradient not populated for parameter '{name}'")
        for p in self._params.values():
            p.step += 1
            t = p.step
            g = p.grad
            p.m = beta1 * p.m + (1.0 - beta1) * g
            p.v = beta2 * p.v + (1.0 - beta2) * g * g
            m_hat = p.m / (1.0 - beta1**t)
            v_hat = p.v / (1.0 - beta2**t)
            p.value -= learning_rate * m_hat / (np.sqrt(v_hat) + eps)
            p.zero_grad()

    def snapshot(self) -> dict[str, np.ndarray]:
        """Copy of all parameter values (used for best-checkpoint keeping)."""
        return {name: p.value.copy() for name, p in self._params.items()}

    def restore(self, values: dict[str, np.ndarray]) -> None:
        for name, p in self._params.items():
            if name not in values:
                raise UsageError(f"snapshot is missing parameter '{name}'")
            v = values[name]
            if v.shape != p.value.shape:
                raise ShapeError(
                    f"snapshot shape {v.shape} does not match parameter "
                    f"'{name}' shape {p.value.shape}"
                )
            p.value[...] = v


def save_checkpoint(
    path, store: ParamStore, seed: int, config_hash: str, extra: dict | None = None
) -> None:
    """Write a single-file checkpoint.

    Layout: magic, uint64 little-endian manifest length, manifest JSON
    (parameter names, shapes, dtype, seed, config hash), then the raw
    little-endian float64 arrays concatenated in manifest order.
    """
    manifest = {
        "format": 1,
        "dtype": "<f8",
        "seed": int(seed),
        "config_hash": config_hash,
        "params": [
            {"name": name, "shape": list(p.value.shape)} for name, p in store.items()
        ],
    }
    if extra:
        manifest["extra"] = extra
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for _, p in store.items():
            f.write(np.ascontiguousarray(p.value, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a checkpoint back as (manifest, name -> array)."""
    with open(path, "rb") as f:
        magic = f.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise UsageError(f"{path}: not a checkpoint file (bad magic)")
        (blob_len,) = struct.unpack("<Q", f.read(8))
        manifest = json.loads(f.read(blob_len).decode("utf-8"))
        values: dict[str, np.ndarray] = {}
        for entry in manifest["params"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = f.read(count * 8)
            if len(raw) != count * 8:
                raise UsageError(f"{path}: truncated checkpoint at '{entry['name']}'")
            values[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        trailing = f.read(1)
        if trailing:
            raise UsageError(f"{path}: trailing bytes after last parameter")
    return manifest, values

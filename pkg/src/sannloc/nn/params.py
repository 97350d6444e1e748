from __future__ import annotations

import json
import math
from typing import Iterator

import numpy as np

from .ops import ShapeMismatch


class ParamStore:
    """Named float64 parameters with gradient buffers and Adamax state (m, u, t)."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.m: dict[str, np.ndarray] = {}
        self.u: dict[str, np.ndarray] = {}
        self.t = 0

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        value = np.array(value, dtype=np.float64)
        self.params[name] = value
        self.grads[name] = np.zeros_like(value)
        self.m[name] = np.zeros_like(value)
        self.u[name] = np.zeros_like(value)
        return value

    def __getitem__(self, name: str) -> np.ndarray:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self) -> Iterator[str]:
        return iter(self.params)

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def accumulate(self, name: str, grad: np.ndarray) -> None:
        if grad.shape != self.grads[name].shape:
            raise ShapeMismatch(f"gradient for {name}: {grad.shape} vs {self.grads[name].shape}")
        self.grads[name] += grad

    def copy(self) -> "ParamStore":
        other = ParamStore()
        for k, v in self.params.items():
            other.add(k, v.copy())
            other.m[k] = self.m[k].copy()
            other.u[k] = self.u[k].copy()
        other.t = self.t
        return other

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}

    def load_snapshot(self, snap: dict[str, np.ndarray]) -> None:
        for k, v in snap.items():
            self.params[k][...] = v

    def to_obj(self) -> dict:
        return {
            k: {"shape": list(v.shape), "values": v.reshape(-1).tolist()} for k, v in self.params.items()
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "ParamStore":
        store = cls()
        for k, entry in obj.items():
            shape = tuple(entry["shape"])
            values = np.asarray(entry["values"], dtype=np.float64)
            if values.size != math.prod(shape):
                raise ValueError(f"parameter {k}: {values.size} values for shape {shape}")
            store.add(k, values.reshape(shape))
        return store

    def digest_json(self) -> str:
        return json.dumps(self.to_obj(), sort_keys=True)


def adamax_step(store: ParamStore, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """m <- b1 m + (1-b1) g;  u <- max(b2 u, |g|);  theta <- theta - lr/(1-b1^t) * m/(u+eps)."""
    store.t += 1
    step = lr / (1.0 - beta1 ** store.t)
    for name, theta in store.params.items():
        g = store.grads[name]
        m = store.m[name]
        u = store.u[name]
        m *= beta1
        m += (1.0 - beta1) * g
        np.maximum(beta2 * u, np.abs(g), out=u)
        theta -= step * m / (u + eps)


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


def embedding_init(rng: np.random.Generator, n_rows: int, dim: int, scale: float = 0.05) -> np.ndarray:
    return rng.uniform(-scale, scale, size=(n_rows, dim))


def lstm_init(rng: np.random.Generator, d_in: int, d_h: int) -> tuple[np.ndarray, np.ndarray]:
    """Glorot-uniform gate weights, zero biases except forget gate = 1."""
    W = np.concatenate(
        [glorot_uniform(rng, d_in + d_h, d_h) for _ in range(4)], axis=1
    )
    b = np.zeros(4 * d_h)
    b[d_h:2 * d_h] = 1.0
    return W, b

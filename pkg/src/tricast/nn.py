"""Parameter containers and the linear layer shared by every encoder.

Weight matrices are initialized uniformly in ±sqrt(6/(fan_in+fan_out)),
biases to zero, gains to one; embedding-style parameters use a small uniform
range. All randomness flows from a config seed through ``derive_rng`` so that
construction order never affects the draw for a named parameter.
"""

from __future__ import annotations

import hashlib
from typing import Iterator

import numpy as np

from . import tensor as T
from .tensor import Tensor

EMBED_INIT_RANGE = 0.02


def derive_rng(seed: int, name: str) -> np.random.Generator:
    """Deterministic per-name RNG derived from a single config seed."""
    digest = hashlib.sha256(f"{seed}/{name}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def uniform_fan(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


class Module:
    """Base with recursive parameter discovery over attributes and lists."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for key, value in vars(self).items():
            name = f"{prefix}{key}" if prefix else key
            yield from _walk(name, value)

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters())


def _walk(name: str, value) -> Iterator[tuple[str, Tensor]]:
    if isinstance(value, Tensor):
        if value.requires_grad:
            yield name, value
    elif isinstance(value, Module):
        yield from value.named_parameters(prefix=name + ".")
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            yield from _walk(f"{name}.{i}", item)
    elif isinstance(value, dict):
        for key in sorted(value):
            yield from _walk(f"{name}.{key}", value[key])


class Linear(Module):
    """Affine map of the last dimension; rank-2 inputs go through ``matmul``,
    higher ranks are flattened and restored."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, bias: bool = True):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = Tensor(uniform_fan(rng, in_dim, out_dim, (in_dim, out_dim)), requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim), requires_grad=True) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim == 2:
            out = T.matmul(x, self.weight)
        else:
            flat = T.reshape(x, (-1, self.in_dim))
            out = T.reshape(T.matmul(flat, self.weight), x.shape[:-1] + (self.out_dim,))
        if self.bias is not None:
            out = T.add(out, self.bias)
        return out


class RMSNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-6):
        self.gamma = Tensor(np.ones(dim), requires_grad=True)
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return T.rms_norm(x, self.gamma, self.eps)


def embedding_param(rng: np.random.Generator, shape) -> Tensor:
    return Tensor(rng.uniform(-EMBED_INIT_RANGE, EMBED_INIT_RANGE, size=shape), requires_grad=True)

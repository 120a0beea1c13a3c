"""Forecast heads. Each head owns a scale p and emits the horizon in chunks
of p steps: iteration i adds a trained iteration vector to the last fused
token and maps it through a shared bias-free linear layer, and the
concatenated chunks are cut back to the horizon. A small MLP over the
mean-pooled tokens weighs the heads; the fused forecast is their convex
combination.
"""

from __future__ import annotations

import numpy as np

from .config import ModelConfig
from .nn import Linear, Module, embedding_param
from .tensor import (Tensor, add, broadcast_to, concat, getitem, mul, relu,
                     reshape, softmax_axis, tmean)


def head_iterations(horizon: int, scale: int) -> int:
    return -(-horizon // scale)


class ScaleHead(Module):
    """One forecasting scale: bias-free projection reused across iterations,
    plus one trained vector per iteration."""

    def __init__(self, cfg: ModelConfig, scale: int, rng):
        self.scale = scale
        self.horizon = cfg.horizon
        self.n_vars = cfg.n_vars
        self.iters = head_iterations(cfg.horizon, scale)
        self.proj = Linear(cfg.d_model, scale * cfg.n_vars, rng, bias=False)
        self.iter_emb = embedding_param(rng, (self.iters, cfg.d_model))

    def __call__(self, h_last: Tensor) -> Tensor:
        batch = h_last.shape[0]
        chunks = []
        for i in range(self.iters):
            step = add(h_last, getitem(self.iter_emb, i))
            chunks.append(self.proj(step))
        flat = concat(chunks, axis=1)
        forecast = reshape(flat, (batch, self.iters * self.scale, self.n_vars))
        return getitem(forecast, (slice(None), slice(0, self.horizon), slice(None)))


class MultiScalePredictor(Module):
    """Three scale heads fused by data-dependent convex weights."""

    def __init__(self, cfg: ModelConfig, rng):
        self.heads = [ScaleHead(cfg, scale, rng) for scale in cfg.head_scales]
        self.weight_in = Linear(cfg.d_model, cfg.weight_mlp_hidden, rng)
        self.weight_out = Linear(cfg.weight_mlp_hidden, len(self.heads), rng)

    def head_weights(self, fused_tokens: Tensor) -> Tensor:
        pooled = tmean(fused_tokens, axis=1)
        return softmax_axis(self.weight_out(relu(self.weight_in(pooled))), axis=-1)

    def __call__(self, fused_tokens: Tensor) -> tuple[list[Tensor], Tensor, Tensor]:
        h_last = getitem(fused_tokens, (slice(None), -1, slice(None)))
        per_head = [head(h_last) for head in self.heads]
        weights = self.head_weights(fused_tokens)
        batch, horizon, n_vars = per_head[0].shape
        fused = None
        for m, pred in enumerate(per_head):
            w = getitem(weights, (slice(None), m))
            w = broadcast_to(reshape(w, (batch, 1, 1)), (batch, horizon, n_vars))
            term = mul(pred, w)
            fused = term if fused is None else add(fused, term)
        return per_head, weights, fused


class SingleScalePredictor(Module):
    """Ablation head: one direct projection of the last token to the whole
    horizon, with a constant unit weight."""

    def __init__(self, cfg: ModelConfig, rng):
        self.horizon = cfg.horizon
        self.n_vars = cfg.n_vars
        self.proj = Linear(cfg.d_model, cfg.horizon * cfg.n_vars, rng, bias=False)

    def __call__(self, fused_tokens: Tensor) -> tuple[list[Tensor], Tensor, Tensor]:
        h_last = getitem(fused_tokens, (slice(None), -1, slice(None)))
        batch = h_last.shape[0]
        pred = reshape(self.proj(h_last), (batch, self.horizon, self.n_vars))
        weights = Tensor(np.ones((batch, 1)))
        return [pred], weights, pred

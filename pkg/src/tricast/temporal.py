"""Temporal encoder: overlapping patches of the input window become tokens,
which pass through pre-norm transformer blocks whose feed-forward stage is a
sparsely gated mixture of experts. Each expert blends a learned frequency
feature map with a plain MLP; the router scores tokens with its own frequency
map and keeps only the top-k gates.
"""

from __future__ import annotations

import math

import numpy as np

from .config import ModelConfig
from .nn import Linear, Module, RMSNorm, embedding_param
from .tensor import (Tensor, add, bmm, broadcast_to, concat, cos, getitem, mul,
                     relu, reshape, sigmoid, sin, softmax_axis, stack, transpose)


class PatchEmbed(Module):
    """Flatten overlapping (patch_len x n_vars) slices to tokens and add a
    learned position vector per token."""

    def __init__(self, cfg: ModelConfig, rng):
        self.patch_len = cfg.patch_len
        self.stride = cfg.patch_stride
        self.n_patches = cfg.n_patches
        self.proj = Linear(cfg.patch_len * cfg.n_vars, cfg.d_model, rng)
        self.pos = embedding_param(rng, (cfg.n_patches, cfg.d_model))

    def __call__(self, x: Tensor) -> Tensor:
        batch, length, n_vars = x.shape
        flat = self.patch_len * n_vars
        pieces = []
        for w in range(self.n_patches):
            off = w * self.stride
            sl = getitem(x, (slice(None), slice(off, off + self.patch_len), slice(None)))
            pieces.append(reshape(sl, (batch, flat)))
        tokens = stack(pieces, axis=1)
        return add(self.proj(tokens), self.pos)


class FrequencyTimeCell(Module):
    """Project to a frequency space, take (cos, sin) of each coordinate, and
    mix the harmonics back with the original features."""

    def __init__(self, d_model: int, freq_width: int, rng):
        self.to_freq = Linear(d_model, freq_width, rng)
        self.out = Linear(d_model + 2 * freq_width, d_model, rng)

    def __call__(self, x: Tensor) -> Tensor:
        f = self.to_freq(x)
        return self.out(concat([x, cos(f), sin(f)], axis=-1))


class Expert(Module):
    """Convex blend of a frequency cell and a width-4d MLP; the blend weight
    is a trained scalar squashed through a sigmoid. Without the frequency
    path this reduces to the plain MLP."""

    def __init__(self, d_model: int, freq_width: int, alpha_init: float,
                 use_ftc: bool, rng):
        self.use_ftc = use_ftc
        hidden = 4 * d_model
        self.ffn_in = Linear(d_model, hidden, rng)
        self.ffn_out = Linear(hidden, d_model, rng)
        if use_ftc:
            self.ftc = FrequencyTimeCell(d_model, freq_width, rng)
            raw = math.log(alpha_init / (1.0 - alpha_init))
            self.alpha_raw = Tensor(np.asarray(raw), requires_grad=True)

    def blend_weight(self) -> Tensor:
        return sigmoid(self.alpha_raw)

    def __call__(self, x: Tensor) -> Tensor:
        y = self.ffn_out(relu(self.ffn_in(x)))
        if not self.use_ftc:
            return y
        a = self.blend_weight()
        return add(mul(self.ftc(x), a), mul(y, add(1.0, mul(a, -1.0))))


def top_k_mask(scores: np.ndarray, k: int) -> np.ndarray:
    """0/1 keep mask over the last axis; ties resolve to the lowest index."""
    order = np.argsort(-scores, axis=-1, kind="stable")
    mask = np.zeros_like(scores)
    np.put_along_axis(mask, order[..., :k], 1.0, axis=-1)
    return mask


class Router(Module):
    """Per-token softmax over experts with hard top-k selection.

    Kept gates retain their softmax values (no renormalization); dropped
    gates are exactly zero, and gradients flow only through the kept ones.
    """

    def __init__(self, d_model: int, n_experts: int, top_k: int,
                 freq_width: int, use_ftc: bool, rng):
        self.top_k = top_k
        self.use_ftc = use_ftc
        if use_ftc:
            self.ftc = FrequencyTimeCell(d_model, freq_width, rng)
        self.score = Linear(d_model, n_experts, rng)

    def __call__(self, x: Tensor) -> Tensor:
        h = add(self.ftc(x), x) if self.use_ftc else x
        s = softmax_axis(self.score(h), axis=-1)
        return mul(s, Tensor(top_k_mask(s.data, self.top_k)))


class SelfAttention(Module):
    """Multi-head scaled dot-product attention. In causal mode positions
    after the query are pushed to -1e30 before the softmax so they contribute
    exactly zero."""

    def __init__(self, d_model: int, n_heads: int, rng, causal: bool = True):
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.causal = causal
        self.q = Linear(d_model, d_model, rng)
        self.k = Linear(d_model, d_model, rng)
        self.v = Linear(d_model, d_model, rng)
        self.out = Linear(d_model, d_model, rng)

    def _split(self, t: Tensor, batch: int, seq: int) -> Tensor:
        t = reshape(t, (batch, seq, self.n_heads, self.d_head))
        t = transpose(t, (0, 2, 1, 3))
        return reshape(t, (batch * self.n_heads, seq, self.d_head))

    def __call__(self, x: Tensor) -> Tensor:
        batch, seq, d_model = x.shape
        q = self._split(self.q(x), batch, seq)
        k = self._split(self.k(x), batch, seq)
        v = self._split(self.v(x), batch, seq)
        scores = mul(bmm(q, transpose(k, (0, 2, 1))), 1.0 / math.sqrt(self.d_head))
        if self.causal:
            mask = np.triu(np.full((seq, seq), -1e30), k=1)
            scores = add(scores, Tensor(mask))
        attn = softmax_axis(scores, axis=-1)
        ctx = bmm(attn, v)
        ctx = transpose(reshape(ctx, (batch, self.n_heads, seq, self.d_head)), (0, 2, 1, 3))
        return self.out(reshape(ctx, (batch, seq, d_model)))


class MoEBlock(Module):
    """Pre-norm residual block: attention, then the gated expert mixture."""

    def __init__(self, cfg: ModelConfig, use_ftc: bool, rng):
        d = cfg.d_model
        self.norm1 = RMSNorm(d, cfg.rms_eps)
        self.attn = SelfAttention(d, cfg.n_heads, rng, causal=True)
        self.norm2 = RMSNorm(d, cfg.rms_eps)
        self.router = Router(d, cfg.n_experts, cfg.top_k, cfg.freq_width, use_ftc, rng)
        self.experts = [Expert(d, cfg.freq_width, cfg.alpha_init, use_ftc, rng)
                        for _ in range(cfg.n_experts)]

    def __call__(self, h: Tensor) -> Tensor:
        u = add(self.attn(self.norm1(h)), h)
        z = self.norm2(u)
        gates = self.router(z)
        batch, seq, d = z.shape
        mixed = None
        for i, expert in enumerate(self.experts):
            g = getitem(gates, (slice(None), slice(None), i))
            g = broadcast_to(reshape(g, (batch, seq, 1)), (batch, seq, d))
            term = mul(expert(z), g)
            mixed = term if mixed is None else add(mixed, term)
        return add(mixed, u)


class TemporalEncoder(Module):
    """Patch embedding followed by the mixture-of-experts blocks; with zero
    blocks the embeddings pass through untouched."""

    def __init__(self, cfg: ModelConfig, rng):
        self.embed = PatchEmbed(cfg, rng)
        ftc_set = cfg.ftc_block_set()
        self.blocks = [MoEBlock(cfg, b in ftc_set, rng) for b in range(cfg.n_blocks)]

    def __call__(self, x: Tensor) -> Tensor:
        h = self.embed(x)
        for block in self.blocks:
            h = block(h)
        return h

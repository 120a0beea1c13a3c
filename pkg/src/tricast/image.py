"""Image encoder for rasterized window charts.

The chart is cut into as many square vertical strips as there are temporal
patches, so image tokens and series tokens line up one-to-one. Position
information comes from a fixed-size trainable grid whose column profile is
resampled to the strip count with bicubic interpolation; the resampling is a
constant matrix, which keeps the grid trainable through it.
"""

from __future__ import annotations

import numpy as np

from .config import ModelConfig
from .errors import ShapeError
from .nn import Linear, Module, RMSNorm, embedding_param
from .tensor import (Tensor, add, broadcast_to, matmul, relu, reshape, stack,
                     tmean)
from .temporal import SelfAttention

POS_GRID_SIDE = 14


def _cubic_weight(t: float, a: float = -0.5) -> float:
    t = abs(t)
    if t <= 1.0:
        return (a + 2.0) * t ** 3 - (a + 3.0) * t ** 2 + 1.0
    if t < 2.0:
        return a * t ** 3 - 5.0 * a * t ** 2 + 8.0 * a * t - 4.0 * a
    return 0.0


def bicubic_resample_matrix(n_src: int, n_dst: int) -> np.ndarray:
    """(n_dst, n_src) matrix resampling a 1-D signal with Keys' cubic kernel.

    Uses the half-pixel coordinate convention; taps falling outside the
    source range clamp to the border sample. Equal sizes give the identity.
    """
    if n_src < 1 or n_dst < 1:
        raise ShapeError("resample sizes must be positive")
    weights = np.zeros((n_dst, n_src))
    scale = n_src / n_dst
    for i in range(n_dst):
        s = (i + 0.5) * scale - 0.5
        base = int(np.floor(s))
        frac = s - base
        for tap in range(-1, 3):
            w = _cubic_weight(frac - tap)
            src = min(max(base + tap, 0), n_src - 1)
            weights[i, src] += w
    return weights


def nearest_resize(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbor resize with half-pixel sampling (pure numpy)."""
    in_h, in_w = image.shape[-2:]
    rows = np.clip(np.floor((np.arange(out_h) + 0.5) * in_h / out_h), 0, in_h - 1).astype(int)
    cols = np.clip(np.floor((np.arange(out_w) + 0.5) * in_w / out_w), 0, in_w - 1).astype(int)
    return image[..., rows[:, None], cols[None, :]]


class TransformerBlock(Module):
    """Pre-norm residual block: self-attention then a width-4d MLP."""

    def __init__(self, d_model: int, n_heads: int, rms_eps: float, rng,
                 causal: bool = False):
        self.norm1 = RMSNorm(d_model, rms_eps)
        self.attn = SelfAttention(d_model, n_heads, rng, causal=causal)
        self.norm2 = RMSNorm(d_model, rms_eps)
        self.ffn_in = Linear(d_model, 4 * d_model, rng)
        self.ffn_out = Linear(4 * d_model, d_model, rng)

    def __call__(self, h: Tensor) -> Tensor:
        u = add(self.attn(self.norm1(h)), h)
        return add(self.ffn_out(relu(self.ffn_in(self.norm2(u)))), u)


class ImageEncoder(Module):
    """Charts in, one feature vector per vertical strip out.

    Accepts raw (B, H, W) chart arrays; pixels are constants, so gradients
    stop at the strip projection.
    """

    def __init__(self, cfg: ModelConfig, rng):
        self.height = cfg.chart_height
        self.n_strips = cfg.n_patches
        self.proj = Linear(cfg.chart_height * cfg.chart_height, cfg.d_model, rng)
        self.pos_grid = embedding_param(rng, (POS_GRID_SIDE, POS_GRID_SIDE, cfg.d_model))
        self.resample = Tensor(bicubic_resample_matrix(POS_GRID_SIDE, self.n_strips))
        self.blocks = [TransformerBlock(cfg.d_model, cfg.n_heads, cfg.rms_eps, rng)
                       for _ in range(cfg.image_depth)]

    def strip_positions(self) -> Tensor:
        """Column profile of the grid (mean over rows), resampled to strips."""
        profile = tmean(self.pos_grid, axis=0)
        return matmul(self.resample, profile)

    def __call__(self, charts: np.ndarray) -> Tensor:
        charts = np.asarray(charts, dtype=np.float64)
        batch, height, width = charts.shape
        if height != self.height or width != self.n_strips * self.height:
            raise ShapeError(f"expected charts of shape (B, {self.height}, "
                             f"{self.n_strips * self.height}), got {charts.shape}")
        x = Tensor(charts)
        pieces = []
        for t in range(self.n_strips):
            strip = x[:, :, t * self.height: (t + 1) * self.height]
            pieces.append(reshape(strip, (batch, self.height * self.height)))
        h = add(self.proj(stack(pieces, axis=1)), self.strip_positions())
        for block in self.blocks:
            h = block(h)
        return h


class SquareCellImageEncoder(Module):
    """Ablation variant: classic square-cell tokenization.

    The chart is nearest-neighbor resized to 56x56, cut into a 14x14 grid of
    4x4 cells, and encoded with the position grid used as-is (no resampling).
    The pooled representation is replicated across the strip count so
    downstream consumers see the usual (B, T, d) layout.
    """

    CANVAS = 4 * POS_GRID_SIDE

    def __init__(self, cfg: ModelConfig, rng):
        self.n_strips = cfg.n_patches
        self.d_model = cfg.d_model
        self.proj = Linear(16, cfg.d_model, rng)
        self.pos_grid = embedding_param(rng, (POS_GRID_SIDE, POS_GRID_SIDE, cfg.d_model))
        self.blocks = [TransformerBlock(cfg.d_model, cfg.n_heads, cfg.rms_eps, rng)
                       for _ in range(cfg.image_depth)]

    def __call__(self, charts: np.ndarray) -> Tensor:
        charts = np.asarray(charts, dtype=np.float64)
        batch = charts.shape[0]
        small = nearest_resize(charts, self.CANVAS, self.CANVAS)
        cells = small.reshape(batch, POS_GRID_SIDE, 4, POS_GRID_SIDE, 4)
        cells = cells.transpose(0, 1, 3, 2, 4).reshape(batch, POS_GRID_SIDE ** 2, 16)
        pos = reshape(self.pos_grid, (POS_GRID_SIDE ** 2, self.d_model))
        h = add(self.proj(Tensor(cells)), pos)
        for block in self.blocks:
            h = block(h)
        pooled = tmean(h, axis=1, keepdims=True)
        return broadcast_to(pooled, (batch, self.n_strips, self.d_model))

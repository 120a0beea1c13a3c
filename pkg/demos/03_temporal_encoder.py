"""Inside the temporal encoder: patches, experts, and the sparse router.

The encoder slices each window into overlapping patches, embeds them, and
runs causal attention blocks whose feed-forward stage is a mixture of
experts. Each expert blends an MLP with a learned frequency feature map;
the router keeps the top-k softmax gates and zeroes the rest without
renormalizing.
"""

import numpy as np

from tricast.config import ModelConfig
from tricast.nn import derive_rng
from tricast.temporal import TemporalEncoder
from tricast.tensor import Tensor, add, no_grad, softmax_axis

cfg = ModelConfig(lookback=32, horizon=8, n_vars=2, d_model=16, patch_len=8,
                  patch_stride=4, n_experts=4, top_k=2, n_blocks=2,
                  head_scales=(3, 5, 8))
cfg.validate()
print(f"lookback {cfg.lookback}, patch_len {cfg.patch_len}, "
      f"stride {cfg.patch_stride} -> {cfg.n_patches} tokens")

enc = TemporalEncoder(cfg, derive_rng(0, "demo/temporal"))
rng = np.random.default_rng(1)
x = Tensor(rng.normal(size=(2, cfg.lookback, cfg.n_vars)))
with no_grad():
    tokens = enc(x)
print("encoder output:", tokens.shape)

print("\n== router gates for the first window, block 0 ==")
block = enc.blocks[0]
with no_grad():
    u = add(block.attn(block.norm1(enc.embed(x))), enc.embed(x))
    z = block.norm2(u)
    gates = block.router(z).data[0]
    scores = softmax_axis(block.router.score(
        add(block.router.ftc(z), z)), axis=-1).data[0]
print("softmax scores (token x expert):")
print(np.round(scores, 3))
print(f"kept gates (top {cfg.top_k} per token, others exactly zero):")
print(np.round(gates, 3))
print("rows sum below 1 because dropped gates are not renormalized:",
      np.round(gates.sum(axis=-1), 3))

print("\n== each expert blends its frequency cell with a plain MLP ==")
for i, expert in enumerate(enc.blocks[0].experts):
    with no_grad():
        a = expert.blend_weight().item()
    print(f"expert {i}: frequency share {a:.3f}, MLP share {1 - a:.3f}")

print("\n== causality: early tokens ignore late inputs ==")
bumped = x.data.copy()
bumped[:, -cfg.patch_stride:, :] += 10.0
with no_grad():
    moved = enc(Tensor(bumped))
same = np.array_equal(tokens.data[:, :-1], moved.data[:, :-1])
print(f"perturbed the last {cfg.patch_stride} time steps; "
      f"tokens 0..{cfg.n_patches - 2} bit-identical: {same}")

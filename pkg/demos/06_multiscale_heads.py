"""Multi-scale forecasting heads and their learned convex combination.

Each head owns a chunk size: it emits the horizon in ceil(H / size)
iterations from the last fused token and truncates the overshoot. A small
MLP over the mean-pooled tokens turns into softmax weights, so the final
forecast is always a convex blend of the heads.
"""

import numpy as np

from tricast.config import ModelConfig
from tricast.nn import derive_rng
from tricast.predict import MultiScalePredictor, head_iterations
from tricast.tensor import Tensor, no_grad

print("== iteration counts ==")
for horizon in (96, 192, 336, 720):
    counts = [head_iterations(horizon, s) for s in (30, 50, 100)]
    print(f"horizon {horizon:3d}: scales (30, 50, 100) -> iterations {counts}")

cfg = ModelConfig(lookback=32, horizon=10, n_vars=2, d_model=16, patch_len=8,
                  patch_stride=4, head_scales=(3, 5, 8), weight_mlp_hidden=8)
cfg.validate()
pred = MultiScalePredictor(cfg, derive_rng(0, "demo/heads"))
rng = np.random.default_rng(3)
tokens = Tensor(rng.normal(size=(4, cfg.n_patches, cfg.d_model)))

with no_grad():
    per_head, weights, fused = pred(tokens)

print(f"\nhorizon {cfg.horizon} with scales {cfg.head_scales}:")
for head, out in zip(pred.heads, per_head):
    print(f"  scale {head.scale}: {head.iters} iterations x {head.scale} steps"
          f" = {head.iters * head.scale}, truncated to {out.shape[1]}")

print("\nper-window head weights (rows sum to 1):")
print(np.round(weights.data, 3))

stacked = np.stack([p.data for p in per_head])
inside = np.all(fused.data >= stacked.min(axis=0) - 1e-9) and \
    np.all(fused.data <= stacked.max(axis=0) + 1e-9)
print("fused forecast stays inside the per-coordinate head envelope:", inside)

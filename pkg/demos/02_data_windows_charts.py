"""From a raw series to supervised windows, rendered charts, and trend texts.

Shows the full ingestion path: chronological split with train-only
statistics, sliding windows, the binary line-chart rasterizer that feeds
the image encoder, and the text items attached to each window.
"""

import numpy as np

from tricast.data import (chronological_split, make_windows, render_chart,
                          synthetic_sine_trend)
from tricast.text import attach_window_texts

series = synthetic_sine_trend(n_steps=400, n_vars=2, seed=0)
print(f"series: {len(series.timestamps)} hourly steps, "
      f"variables {series.variable_names}")
print("first stamps:", series.timestamps[:3])

split = chronological_split(series, train_ratio=0.7, val_ratio=0.1)
print(f"split ranges: train={split.train} val={split.val} test={split.test}")
print("train mean:", np.round(split.mean, 3), "train std:", np.round(split.std, 3))

samples = make_windows(series, split, "train", lookback=48, horizon=12,
                       stride=24, chart_height=12, patch_count=3)
attach_window_texts(samples, series, None)
print(f"\n{len(samples)} training windows (stride 24)")

s = samples[0]
print(f"window 0: x_enc {s.x_enc.shape}, target {s.target.shape}, "
      f"chart {s.chart.shape}")
print("texts:")
for item in s.texts:
    print(f"  [{item.category}] {item.content}")

print("\nchart of window 0 (one pixel per column per variable):")
for row in s.chart:
    print("".join("#" if v else "." for v in row))

print("\nthe same scaling is shared across variables, so two flat lines at")
print("different levels stay at different heights:")
flat = np.stack([np.zeros(16), np.ones(16)], axis=1)
for row in render_chart(flat, 6, 1):
    print("".join("#" if v else "." for v in row))

"""The per-window heterogeneous graph and its relational convolution.

Every window becomes a small directed graph: a series node and an image
node per temporal patch plus one node per text item, wired by seven typed
relations. A relation-typed graph convolution (own weight per relation,
in-neighbor mean, self connection, ReLU) mixes the modalities; the series
nodes after the last layer are the fused tokens.
"""

import numpy as np

from tricast.config import ModelConfig
from tricast.graph import RELATIONS, RelationalFusion, build_graph
from tricast.nn import derive_rng
from tricast.tensor import Tensor, no_grad

graph = build_graph(n_tokens=5, n_texts=3, past_window=2, future_window=2)
print(f"graph for 5 patches + 3 texts: {graph.edge_count()} edges")
for relation in RELATIONS:
    print(f"  {relation:15s} {graph.edge_count(relation):3d}")

print("\nfuture edges only exist while a full future window fits, so the")
print("last tokens have none:")
for r, src, dst in graph.all_edges():
    if r == "future_series":
        print(f"  series {src.index} -> series {dst.index}")

print("\ntext nodes fan out but never receive edges:")
incoming_to_text = [1 for _, _, dst in graph.all_edges() if dst.modality == "text"]
print("  edges into text nodes:", sum(incoming_to_text))

cfg = ModelConfig(lookback=40, horizon=8, n_vars=2, d_model=16, patch_len=8,
                  patch_stride=8, past_window=2, future_window=2,
                  graph_layers=2, head_scales=(3, 5, 8))
cfg.validate()
fusion = RelationalFusion(cfg, derive_rng(0, "demo/fusion"))
rng = np.random.default_rng(2)
series = Tensor(rng.normal(size=(2, 5, 16)))
image = Tensor(rng.normal(size=(2, 5, 16)))
text = Tensor(rng.normal(size=(2, 3, 16)))
with no_grad():
    fused = fusion(graph, series, image, text)
print(f"\nfused series tokens after {cfg.graph_layers} layers: {fused.shape}")

with no_grad():
    silent = fusion(graph, series, image, Tensor(np.zeros((2, 3, 16))))
print("zeroing the text features changes the fused tokens:",
      not np.array_equal(fused.data, silent.data))

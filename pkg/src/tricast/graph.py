"""Heterogeneous fusion graph over aligned series, image, and text tokens.

Each window becomes a small directed graph: one series node and one image
node per temporal patch plus one node per text item. Seven typed relations
wire them together, and a relational graph convolution (one weight matrix per
relation per layer, mean aggregation over in-neighbors, plus a self loop
through a separate weight) mixes information across modalities. The series
node states after the last layer are the fused temporal features.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .config import ModelConfig
from .errors import ShapeError
from .nn import Linear, Module
from .tensor import Tensor, add, bmm, relu

MODALITIES = ("series", "image", "text")

# cross_ti links each image token with its series twin in both directions
# under one shared weight; text fans out to every series and image token;
# past_* edges run forward in time within a near window, future_* edges run
# backward from the next few tokens. Text nodes are never destinations.
RELATIONS = ("cross_ti", "text_series", "text_image",
             "past_series", "future_series", "past_image", "future_image")


@dataclass(frozen=True)
class NodeId:
    modality: str
    index: int


@dataclass
class HeteroGraph:
    n_tokens: int
    n_texts: int
    past_window: int
    future_window: int
    edges: dict[str, list[tuple[NodeId, NodeId]]] = field(default_factory=dict)

    def edge_count(self, relation: str | None = None) -> int:
        if relation is not None:
            return len(self.edges[relation])
        return sum(len(v) for v in self.edges.values())

    def all_edges(self):
        for relation in RELATIONS:
            for src, dst in self.edges[relation]:
                yield relation, src, dst


def build_graph(n_tokens: int, n_texts: int, past_window: int,
                future_window: int) -> HeteroGraph:
    """Enumerate the typed edge lists for one window.

    Future edges only exist for tokens that still have future_window tokens
    ahead of them, so their count is future_window * max(T - future_window, 0).
    """
    if n_tokens < 1 or n_texts < 0 or past_window < 0 or future_window < 0:
        raise ShapeError("graph sizes must be non-negative with at least one token")
    ser = lambda i: NodeId("series", i)
    img = lambda i: NodeId("image", i)
    txt = lambda i: NodeId("text", i)
    edges: dict[str, list[tuple[NodeId, NodeId]]] = {r: [] for r in RELATIONS}
    for t in range(n_tokens):
        edges["cross_ti"].append((img(t), ser(t)))
        edges["cross_ti"].append((ser(t), img(t)))
    for n in range(n_texts):
        for t in range(n_tokens):
            edges["text_series"].append((txt(n), ser(t)))
            edges["text_image"].append((txt(n), img(t)))
    for i in range(n_tokens):
        for j in range(max(0, i - past_window), i):
            edges["past_series"].append((ser(j), ser(i)))
            edges["past_image"].append((img(j), img(i)))
    for i in range(n_tokens - future_window):
        for j in range(i + 1, i + future_window + 1):
            edges["future_series"].append((ser(j), ser(i)))
            edges["future_image"].append((img(j), img(i)))
    return HeteroGraph(n_tokens, n_texts, past_window, future_window, edges)


def graph_to_csv(graph: HeteroGraph, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["relation", "src_modality", "src_index",
                         "dst_modality", "dst_index"])
        for relation, src, dst in graph.all_edges():
            writer.writerow([relation, src.modality, src.index, dst.modality, dst.index])


def _node_counts(graph: HeteroGraph) -> dict[str, int]:
    return {"series": graph.n_tokens, "image": graph.n_tokens, "text": graph.n_texts}


def adjacency_blocks(graph: HeteroGraph) -> dict[tuple[str, str, str], np.ndarray]:
    """Per (relation, dst_modality, src_modality): a dense matrix whose entry
    [i, j] is 1 / in_degree(dst i under that relation) for each edge j -> i."""
    counts = _node_counts(graph)
    degrees = {r: {m: np.zeros(counts[m]) for m in MODALITIES} for r in RELATIONS}
    for relation, _, dst in graph.all_edges():
        degrees[relation][dst.modality][dst.index] += 1
    blocks: dict[tuple[str, str, str], np.ndarray] = {}
    for relation, src, dst in graph.all_edges():
        key = (relation, dst.modality, src.modality)
        if key not in blocks:
            blocks[key] = np.zeros((counts[dst.modality], counts[src.modality]))
        blocks[key][dst.index, src.index] += 1.0 / degrees[relation][dst.modality][dst.index]
    return blocks


class RelationalFusion(Module):
    """Stack of relation-typed graph convolutions over one window's nodes.

    Every layer owns a bias-free weight per relation plus a self weight; node
    update is relu(self_w @ h_i + sum over relations of the in-neighbor mean
    of rel_w @ h_j). With zero layers the series features pass through.
    """

    def __init__(self, cfg: ModelConfig, rng):
        d = cfg.d_model
        self.layers = [{"rel": {r: Linear(d, d, rng, bias=False) for r in RELATIONS},
                        "self": Linear(d, d, rng, bias=False)}
                       for _ in range(cfg.graph_layers)]
        self._adj_cache: dict[tuple[int, int, int, int], dict] = {}

    def _blocks(self, graph: HeteroGraph) -> dict[tuple[str, str, str], np.ndarray]:
        key = (graph.n_tokens, graph.n_texts, graph.past_window, graph.future_window)
        if key not in self._adj_cache:
            self._adj_cache[key] = adjacency_blocks(graph)
        return self._adj_cache[key]

    def __call__(self, graph: HeteroGraph, series: Tensor, image: Tensor,
                 text: Tensor) -> Tensor:
        batch, n_tokens, d = series.shape
        if image.shape != series.shape:
            raise ShapeError(f"series/image token mismatch: {series.shape} vs {image.shape}")
        if text.shape != (batch, graph.n_texts, d):
            raise ShapeError(f"expected text features {(batch, graph.n_texts, d)}, "
                             f"got {text.shape}")
        if n_tokens != graph.n_tokens:
            raise ShapeError(f"graph built for {graph.n_tokens} tokens, got {n_tokens}")
        blocks = self._blocks(graph)
        feats = {"series": series, "image": image, "text": text}
        for layer in self.layers:
            transformed = {r: {} for r in RELATIONS}
            messages = {}
            for (relation, dst_mod, src_mod), block in blocks.items():
                if src_mod not in transformed[relation]:
                    transformed[relation][src_mod] = layer["rel"][relation](feats[src_mod])
                msg = bmm(Tensor(block), transformed[relation][src_mod])
                messages[dst_mod] = msg if dst_mod not in messages else add(messages[dst_mod], msg)
            updated = {}
            for mod in MODALITIES:
                self_term = layer["self"](feats[mod])
                total = add(messages[mod], self_term) if mod in messages else self_term
                updated[mod] = relu(total)
            feats = updated
        return feats["series"]

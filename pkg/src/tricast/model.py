"""End-to-end forecaster: temporal, image, and text encoders feed the
relational fusion graph, and the fused tokens drive the scale heads.

Construction is fully determined by (config, seed); every submodule draws
from its own named random stream so parameter values never depend on build
order. Checkpoints store the config alongside the named parameter arrays.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .config import ModelConfig, TrainConfig, config_dict, configs_from_dict
from .data import WindowSample
from .errors import DataError
from .graph import HeteroGraph, RelationalFusion, build_graph
from .image import ImageEncoder, SquareCellImageEncoder
from .nn import Linear, Module, derive_rng
from .predict import MultiScalePredictor, SingleScalePredictor
from .temporal import TemporalEncoder
from .tensor import Tensor, broadcast_to, concat, stack, tmean
from .text import TextEmbeddingStore, embed_texts

CHECKPOINT_VERSION = "1"


@dataclass
class ForecastResult:
    forecast: Tensor           # (B, H, D) fused prediction
    per_head: list[Tensor]     # each (B, H, D)
    weights: Tensor            # (B, n_heads) convex head weights


class ForecastModel(Module):
    def __init__(self, cfg: ModelConfig, seed: int = 0):
        cfg.validate()
        self.cfg = cfg
        self.seed = seed
        ablation = set(cfg.ablation)
        self.temporal = TemporalEncoder(cfg, derive_rng(seed, "temporal"))
        image_cls = SquareCellImageEncoder if "no_strip_vit" in ablation else ImageEncoder
        self.image = image_cls(cfg, derive_rng(seed, "image"))
        self.texts = TextEmbeddingStore(cfg.d_model, seed)
        if "no_graph" in ablation:
            self.fusion = None
            self.pooled_proj = Linear(3 * cfg.d_model, cfg.d_model,
                                      derive_rng(seed, "fusion"))
        else:
            self.fusion = RelationalFusion(cfg, derive_rng(seed, "fusion"))
            self.pooled_proj = None
        predictor_cls = SingleScalePredictor if "no_multi_scale" in ablation else MultiScalePredictor
        self.predictor = predictor_cls(cfg, derive_rng(seed, "predict"))

    def _check_batch(self, samples: list[WindowSample]) -> int:
        if not samples:
            raise DataError("empty batch")
        n_texts = len(samples[0].texts)
        if n_texts == 0:
            raise DataError("samples carry no text items; attach them first")
        for s in samples:
            if len(s.texts) != n_texts:
                raise DataError("batch mixes text counts; split it with "
                                "batches_by_text_count first")
        return n_texts

    def encode(self, samples: list[WindowSample]) -> tuple[Tensor, Tensor, Tensor]:
        """Per-modality token matrices for a uniform batch."""
        self._check_batch(samples)
        x = Tensor(np.stack([s.x_enc for s in samples]))
        charts = np.stack([s.chart for s in samples])
        series_tokens = self.temporal(x)
        image_tokens = self.image(charts)
        text_tokens = stack([embed_texts(self.texts, s.texts) for s in samples], axis=0)
        return series_tokens, image_tokens, text_tokens

    def fuse(self, series_tokens: Tensor, image_tokens: Tensor,
             text_tokens: Tensor) -> Tensor:
        batch, n_tokens, d = series_tokens.shape
        if self.fusion is None:
            img = broadcast_to(tmean(image_tokens, axis=1, keepdims=True),
                               (batch, n_tokens, d))
            txt = broadcast_to(tmean(text_tokens, axis=1, keepdims=True),
                               (batch, n_tokens, d))
            return self.pooled_proj(concat([series_tokens, img, txt], axis=-1))
        graph = build_graph(n_tokens, text_tokens.shape[1],
                            self.cfg.past_window, self.cfg.future_window)
        return self.fusion(graph, series_tokens, image_tokens, text_tokens)

    def __call__(self, samples: list[WindowSample]) -> ForecastResult:
        fused_tokens = self.fuse(*self.encode(samples))
        per_head, weights, forecast = self.predictor(fused_tokens)
        return ForecastResult(forecast, per_head, weights)

    def window_graph(self, sample: WindowSample) -> HeteroGraph:
        return build_graph(self.cfg.n_patches, len(sample.texts),
                           self.cfg.past_window, self.cfg.future_window)

    def node_embeddings(self, sample: WindowSample) -> list[tuple[str, int, np.ndarray]]:
        """Pre-fusion node features of one window: series and image tokens in
        time order, then the text vectors in item order."""
        series, image, text = self.encode([sample])
        rows = []
        for t in range(series.shape[1]):
            rows.append(("series", t, series.data[0, t].copy()))
        for t in range(image.shape[1]):
            rows.append(("image", t, image.data[0, t].copy()))
        for n in range(text.shape[1]):
            rows.append(("text", n, text.data[0, n].copy()))
        return rows


def batches_by_text_count(samples: list[WindowSample],
                          batch_size: int) -> list[list[WindowSample]]:
    """Slice into batches of at most batch_size with uniform text counts,
    preserving the incoming order within each group."""
    groups: dict[int, list[WindowSample]] = {}
    for s in samples:
        groups.setdefault(len(s.texts), []).append(s)
    batches = []
    for count in sorted(groups):
        group = groups[count]
        for i in range(0, len(group), batch_size):
            batches.append(group[i: i + batch_size])
    return batches


def save_checkpoint(model: ForecastModel, path, train_cfg: TrainConfig | None = None,
                    **meta) -> None:
    arrays = {f"param:{name}": p.data for name, p in model.named_parameters()}
    np.savez(path,
             version=np.asarray(CHECKPOINT_VERSION),
             config=np.asarray(json.dumps(config_dict(model.cfg, train_cfg))),
             seed=np.asarray(model.seed),
             meta=np.asarray(json.dumps(meta)),
             **arrays)


def load_checkpoint(path) -> tuple[ForecastModel, dict]:
    with np.load(path, allow_pickle=False) as data:
        if "version" not in data:
            raise DataError(f"{path}: not a model checkpoint (no version field)")
        version = str(data["version"])
        if version != CHECKPOINT_VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {version}")
        raw = json.loads(str(data["config"]))
        model_cfg, train_cfg = configs_from_dict(raw)
        model = ForecastModel(model_cfg, seed=int(data["seed"]))
        stored = {k[len("param:"):]: data[k] for k in data.files if k.startswith("param:")}
        for name in stored:  # text vectors exist only after first lookup
            if name.startswith("texts.table."):
                model.texts.table[name[len("texts.table."):]] = Tensor(
                    stored[name], requires_grad=True)
        params = dict(model.named_parameters())
        if set(params) != set(stored):
            missing = sorted(set(params) ^ set(stored))
            raise DataError(f"{path}: parameter set mismatch: {missing[:5]}")
        for name, tensor in params.items():
            if tensor.data.shape != stored[name].shape:
                raise DataError(f"{path}: shape mismatch for {name}")
            tensor.data[...] = stored[name]
        meta = json.loads(str(data["meta"]))
    return model, {"train_cfg": train_cfg, **meta}

"""Multimodal time-series forecasting with chart and text channels fused
over a per-window heterogeneous graph.

The public surface re-exports the pieces most callers need; the submodules
stay importable for everything else.
"""

from .config import (ModelConfig, TrainConfig, config_dict, config_hash,
                     configs_from_dict, load_config)
from .data import (DatasetSplit, RawSeries, WindowSample, apply_few_shot,
                   chronological_split, few_shot_subset, load_csv,
                   make_windows, render_chart, synthetic_sine_trend)
from .errors import ConfigError, DataError, NumericError, ShapeError, StateError
from .graph import HeteroGraph, RelationalFusion, build_graph, graph_to_csv
from .image import ImageEncoder, SquareCellImageEncoder
from .model import (ForecastModel, ForecastResult, batches_by_text_count,
                    load_checkpoint, save_checkpoint)
from .nn import Linear, Module, RMSNorm, derive_rng
from .predict import MultiScalePredictor, ScaleHead, head_iterations
from .temporal import FrequencyTimeCell, MoEBlock, Router, TemporalEncoder
from .tensor import Tensor, backward, grad_check, no_grad
from .text import (TextEmbeddingStore, TextItem, attach_window_texts,
                   build_text_set, label_trend, load_events_csv)
from .train import (Adam, EvalReport, TrainResult, evaluate,
                    last_value_report, train, write_metrics_csv)

__version__ = "0.1.0"

__all__ = [
    "Adam", "ConfigError", "DataError", "DatasetSplit", "EvalReport",
    "ForecastModel", "ForecastResult", "FrequencyTimeCell", "HeteroGraph",
    "ImageEncoder", "Linear", "ModelConfig", "Module", "MoEBlock",
    "MultiScalePredictor", "NumericError", "RMSNorm", "RawSeries",
    "RelationalFusion", "Router", "ScaleHead", "ShapeError",
    "SquareCellImageEncoder", "StateError", "TemporalEncoder", "Tensor",
    "TextEmbeddingStore", "TextItem", "TrainConfig", "TrainResult",
    "WindowSample", "apply_few_shot", "attach_window_texts", "backward",
    "batches_by_text_count", "build_graph", "build_text_set",
    "chronological_split", "config_dict", "config_hash", "configs_from_dict",
    "derive_rng", "evaluate", "few_shot_subset", "grad_check",
    "graph_to_csv", "head_iterations", "label_trend", "last_value_report",
    "load_checkpoint", "load_config", "load_csv", "load_events_csv",
    "make_windows", "no_grad", "render_chart", "save_checkpoint",
    "synthetic_sine_trend", "train", "write_metrics_csv",
]

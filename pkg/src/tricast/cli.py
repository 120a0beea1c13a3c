"""Command-line entry points: train, evaluate, forecast, export-embeddings,
and dump-graph. Exit code 2 flags bad inputs (missing files, invalid
config); 1 flags failures during a run; 0 is success.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .config import ModelConfig, TrainConfig, load_config
from .data import (apply_few_shot, chronological_split, load_csv, make_windows,
                   write_windows_manifest)
from .errors import ConfigError, DataError
from .graph import build_graph, graph_to_csv
from .model import ForecastModel, load_checkpoint
from .text import attach_window_texts, load_events_csv
from .train import (evaluate, last_value_report, train, write_loss_log,
                    write_metrics_csv, write_run_manifest)


def _split_series(series, train_cfg):
    split = chronological_split(series, train_cfg.train_ratio, train_cfg.val_ratio)
    if train_cfg.few_shot_fraction is not None:
        split = apply_few_shot(split, series, train_cfg.few_shot_fraction)
    return split


def _windows(series, split, part, model_cfg, stride, events):
    samples = make_windows(series, split, part, model_cfg.lookback,
                           model_cfg.horizon, stride=stride,
                           chart_height=model_cfg.chart_height,
                           patch_count=model_cfg.n_patches)
    attach_window_texts(samples, series, events)
    return samples


def _events(args):
    return load_events_csv(args.events) if args.events else None


def cmd_train(args) -> int:
    if args.config:
        model_cfg, train_cfg = load_config(args.config)
    else:
        model_cfg, train_cfg = ModelConfig(), TrainConfig()
        model_cfg.validate()
        train_cfg.validate()
    series = load_csv(args.data)
    if model_cfg.n_vars != series.values.shape[1]:
        raise ConfigError(f"config expects {model_cfg.n_vars} variables but "
                          f"{args.data} has {series.values.shape[1]}")
    events = _events(args)
    split = _split_series(series, train_cfg)
    train_samples = _windows(series, split, "train", model_cfg,
                             train_cfg.window_stride, events)
    val_samples = _windows(series, split, "val", model_cfg, 1, events)
    model = ForecastModel(model_cfg, train_cfg.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = train(model, train_samples, val_samples, train_cfg,
                   checkpoint_path=out_dir / "model.npz", max_steps=args.max_steps)
    write_loss_log(out_dir / "loss_log.csv", result.history)
    write_windows_manifest({"train": train_samples, "val": val_samples},
                           out_dir / "windows.csv")
    write_run_manifest(out_dir / "run.json", model_cfg, train_cfg,
                       dataset=Path(args.data).stem, best_epoch=result.best_epoch,
                       best_val_mse=result.best_val_mse,
                       stopped_early=result.stopped_early)
    for row in result.history:
        print(f"epoch {row.epoch}: train_loss={row.train_loss:.6f} "
              f"val_mse={row.val_mse:.6f} lr={row.lr:.2e}")
    print(f"best epoch {result.best_epoch} val_mse={result.best_val_mse:.6f}")
    print(f"checkpoint: {out_dir / 'model.npz'}")
    return 0


def _load_for_inference(args):
    model, meta = load_checkpoint(args.checkpoint)
    train_cfg: TrainConfig = meta["train_cfg"]
    series = load_csv(args.data)
    split = _split_series(series, train_cfg)
    samples = _windows(series, split, args.split, model.cfg, 1, _events(args))
    return model, train_cfg, series, split, samples


def cmd_evaluate(args) -> int:
    model, train_cfg, series, _, samples = _load_for_inference(args)
    report = evaluate(model, samples, train_cfg.batch_size)
    baseline = last_value_report(samples)
    if args.out:
        write_metrics_csv(args.out, [{"dataset": Path(args.data).stem,
                                      "horizon": model.cfg.horizon,
                                      "mse": report.mse, "mae": report.mae}])
    print(f"{args.split}: windows={report.n_windows} mse={report.mse:.6f} "
          f"mae={report.mae:.6f}")
    print(f"last-value baseline: mse={baseline.mse:.6f} mae={baseline.mae:.6f}")
    return 0


def _pick_window(samples, index: int):
    if not 0 <= index < len(samples):
        raise DataError(f"window index {index} out of range "
                        f"(split has {len(samples)} windows)")
    return samples[index]


def cmd_forecast(args) -> int:
    model, _, series, split, samples = _load_for_inference(args)
    sample = _pick_window(samples, args.index)
    forecast = model([sample]).forecast.data[0]
    restored = forecast * split.std + split.mean
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step"] + series.variable_names)
        for h in range(restored.shape[0]):
            writer.writerow([h + 1] + [repr(float(v)) for v in restored[h]])
    print(f"wrote {restored.shape[0]}-step forecast for window {args.index} "
          f"to {args.out}")
    return 0


def cmd_export_embeddings(args) -> int:
    model, _, _, _, samples = _load_for_inference(args)
    sample = _pick_window(samples, args.index)
    rows = model.node_embeddings(sample)
    dim = model.cfg.d_model
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["modality", "index"] + [f"v{i}" for i in range(dim)])
        for modality, index, vec in rows:
            writer.writerow([modality, index] + [repr(float(v)) for v in vec])
    print(f"wrote {len(rows)} node embeddings to {args.out}")
    return 0


def cmd_dump_graph(args) -> int:
    if args.tokens is not None:
        if args.texts is None:
            raise ConfigError("--texts is required with --tokens")
        graph = build_graph(args.tokens, args.texts, args.past, args.future)
    else:
        if not (args.checkpoint and args.data):
            raise ConfigError("give either --tokens/--texts or --checkpoint/--data")
        model, _, _, _, samples = _load_for_inference(args)
        sample = _pick_window(samples, args.index)
        graph = model.window_graph(sample)
    graph_to_csv(graph, args.out)
    print(f"wrote {graph.edge_count()} edges to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tricast",
        description="multimodal graph-fused time-series forecasting")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model and write its artifacts")
    p.add_argument("--data", required=True, help="ETT-style CSV")
    p.add_argument("--config", help="flat TOML run config")
    p.add_argument("--events", help="events sidecar CSV")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--max-steps", type=int, default=None,
                   help="cap optimizer updates (smoke runs)")
    p.set_defaults(func=cmd_train)

    def inference_args(p, split_default):
        p.add_argument("--data", required=True)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--events", help="events sidecar CSV")
        p.add_argument("--split", default=split_default,
                       choices=("train", "val", "test"))

    p = sub.add_parser("evaluate", help="score a checkpoint on a split")
    inference_args(p, "test")
    p.add_argument("--out", help="metrics CSV path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("forecast", help="predict one window in original units")
    inference_args(p, "test")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("export-embeddings",
                       help="dump one window's node embeddings")
    inference_args(p, "train")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_embeddings)

    p = sub.add_parser("dump-graph", help="write a window graph's edge list")
    p.add_argument("--data")
    p.add_argument("--checkpoint")
    p.add_argument("--events")
    p.add_argument("--split", default="train", choices=("train", "val", "test"))
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--tokens", type=int, help="token count for a standalone dump")
    p.add_argument("--texts", type=int, help="text node count for a standalone dump")
    p.add_argument("--past", type=int, default=2)
    p.add_argument("--future", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dump_graph)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - boundary maps failures to exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

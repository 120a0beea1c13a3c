import numpy as np
import pytest

from tricast.config import ModelConfig
from tricast.data import chronological_split, make_windows, synthetic_sine_trend
from tricast.errors import DataError
from tricast.image import ImageEncoder, SquareCellImageEncoder
from tricast.model import (ForecastModel, batches_by_text_count, load_checkpoint,
                           save_checkpoint)
from tricast.predict import MultiScalePredictor, SingleScalePredictor
from tricast.tensor import Tensor, backward, square, tmean
from tricast.text import attach_window_texts


def _cfg(**kw):
    base = dict(lookback=24, horizon=8, n_vars=2, d_model=8, patch_len=8,
                patch_stride=4, n_experts=2, top_k=1, n_blocks=1, n_heads=2,
                image_depth=1, chart_height=16, past_window=1, future_window=1,
                graph_layers=1, head_scales=(3, 5, 10), weight_mlp_hidden=6)
    base.update(kw)
    cfg = ModelConfig(**base)
    cfg.validate()
    return cfg


def _samples(cfg, n=4, with_texts=True):
    series = synthetic_sine_trend(n_steps=200, n_vars=cfg.n_vars, seed=1)
    split = chronological_split(series)
    samples = make_windows(series, split, "train", cfg.lookback, cfg.horizon,
                           chart_height=cfg.chart_height, patch_count=cfg.n_patches)
    if with_texts:
        attach_window_texts(samples, series)
    return samples[:n]


class TestForward:
    def test_result_shapes(self):
        cfg = _cfg()
        model = ForecastModel(cfg, seed=0)
        result = model(_samples(cfg, n=3))
        assert result.forecast.shape == (3, cfg.horizon, cfg.n_vars)
        assert result.weights.shape == (3, 3)
        assert len(result.per_head) == 3
        assert np.all(np.isfinite(result.forecast.data))

    def test_unattached_texts_rejected(self):
        cfg = _cfg()
        model = ForecastModel(cfg, seed=0)
        with pytest.raises(DataError, match="text"):
            model(_samples(cfg, n=2, with_texts=False))

    def test_mixed_text_counts_rejected(self):
        cfg = _cfg()
        model = ForecastModel(cfg, seed=0)
        samples = _samples(cfg, n=2)
        samples[1].texts = samples[1].texts + samples[1].texts[-1:]
        with pytest.raises(DataError, match="mixes"):
            model(samples)

    def test_empty_batch_rejected(self):
        with pytest.raises(DataError):
            ForecastModel(_cfg(), seed=0)([])

    def test_construction_deterministic(self):
        cfg = _cfg()
        a, b = ForecastModel(cfg, seed=3), ForecastModel(cfg, seed=3)
        for (na, pa), (nb, pb) in zip(a.named_parameters(), b.named_parameters()):
            assert na == nb
            np.testing.assert_array_equal(pa.data, pb.data)

    def test_gradients_reach_every_component(self):
        cfg = _cfg()
        model = ForecastModel(cfg, seed=0)
        samples = _samples(cfg, n=2)
        result = model(samples)
        target = Tensor(np.stack([s.target for s in samples]))
        backward(tmean(square(result.forecast - target)))
        probes = {
            "temporal": model.temporal.embed.pos,
            "image": model.image.pos_grid,
            "text": next(iter(model.texts.table.values())),
            "fusion": model.fusion.layers[0]["self"].weight,
            "head": model.predictor.heads[0].proj.weight,
        }
        for label, tensor in probes.items():
            assert tensor.grad is not None, label
            assert np.any(tensor.grad != 0), label


class TestAblations:
    def test_full_model_components(self):
        model = ForecastModel(_cfg(), seed=0)
        assert isinstance(model.image, ImageEncoder)
        assert isinstance(model.predictor, MultiScalePredictor)
        assert model.fusion is not None

    def test_no_multi_scale_single_head(self):
        cfg = _cfg(ablation=("no_multi_scale",))
        model = ForecastModel(cfg, seed=0)
        assert isinstance(model.predictor, SingleScalePredictor)
        result = model(_samples(cfg, n=2))
        assert result.weights.shape == (2, 1)
        assert len(result.per_head) == 1

    def test_no_graph_pools_instead_of_graph(self):
        cfg = _cfg(ablation=("no_graph",))
        model = ForecastModel(cfg, seed=0)
        assert model.fusion is None
        samples = _samples(cfg, n=2)
        result = model(samples)
        assert result.forecast.shape == (2, cfg.horizon, cfg.n_vars)
        series, image, text = model.encode(samples)
        feats = np.concatenate([
            series.data,
            np.repeat(image.data.mean(axis=1, keepdims=True), cfg.n_patches, axis=1),
            np.repeat(text.data.mean(axis=1, keepdims=True), cfg.n_patches, axis=1),
        ], axis=-1)
        want = feats @ model.pooled_proj.weight.data + model.pooled_proj.bias.data
        np.testing.assert_allclose(model.fuse(series, image, text).data, want, atol=1e-12)

    def test_no_strip_vit_swaps_image_encoder(self):
        cfg = _cfg(ablation=("no_strip_vit",))
        model = ForecastModel(cfg, seed=0)
        assert isinstance(model.image, SquareCellImageEncoder)
        assert model(_samples(cfg, n=2)).forecast.shape == (2, 8, 2)

    def test_no_ftc_removes_frequency_parameters(self):
        cfg = _cfg(ablation=("no_ftc",))
        model = ForecastModel(cfg, seed=0)
        names = [n for n, _ in model.named_parameters()]
        assert not any(".ftc." in n for n in names)
        assert model(_samples(cfg, n=2)).forecast.shape == (2, 8, 2)

    def test_each_ablation_changes_structure_or_output(self):
        cfg = _cfg()
        samples = _samples(cfg, n=2)
        base = ForecastModel(cfg, seed=0)(samples).forecast.data
        for ablation in ("no_graph", "no_multi_scale", "no_strip_vit", "no_ftc"):
            variant = ForecastModel(_cfg(ablation=(ablation,)), seed=0)
            out = variant(samples).forecast.data
            assert out.shape == base.shape
            assert not np.allclose(out, base), ablation


class TestBatching:
    def test_groups_by_text_count(self):
        cfg = _cfg()
        samples = _samples(cfg, n=6)
        for s in samples[3:]:
            s.texts = s.texts + s.texts[-1:]
        batches = batches_by_text_count(samples, batch_size=2)
        assert [len(b) for b in batches] == [2, 1, 2, 1]
        for batch in batches:
            assert len({len(s.texts) for s in batch}) == 1

    def test_preserves_order_within_group(self):
        cfg = _cfg()
        samples = _samples(cfg, n=5)
        batches = batches_by_text_count(samples, batch_size=3)
        flat = [s.start_index for b in batches for s in b]
        assert flat == [s.start_index for s in samples]


class TestCheckpoint:
    def test_round_trip_restores_everything(self, tmp_path):
        cfg = _cfg()
        model = ForecastModel(cfg, seed=4)
        samples = _samples(cfg, n=2)
        before = model(samples).forecast.data
        path = tmp_path / "model.npz"
        save_checkpoint(model, path, epoch=3)
        restored, meta = load_checkpoint(path)
        assert meta["epoch"] == 3
        assert restored.cfg == cfg
        assert dict(restored.named_parameters()).keys() == dict(model.named_parameters()).keys()
        np.testing.assert_array_equal(restored(samples).forecast.data, before)

    def test_text_vectors_survive(self, tmp_path):
        cfg = _cfg()
        model = ForecastModel(cfg, seed=4)
        model(_samples(cfg, n=2))
        sid = next(iter(model.texts.table))
        model.texts.table[sid].data[:] = 42.0
        path = tmp_path / "model.npz"
        save_checkpoint(model, path)
        restored, _ = load_checkpoint(path)
        np.testing.assert_array_equal(restored.texts.table[sid].data, 42.0)

    def test_version_field_is_mandatory(self, tmp_path):
        path = tmp_path / "bogus.npz"
        np.savez(path, stuff=np.zeros(3))
        with pytest.raises(DataError, match="version"):
            load_checkpoint(path)

    def test_unsupported_version_rejected(self, tmp_path):
        cfg = _cfg()
        model = ForecastModel(cfg, seed=0)
        path = tmp_path / "model.npz"
        save_checkpoint(model, path)
        data = dict(np.load(path, allow_pickle=False))
        data["version"] = np.asarray("999")
        np.savez(path, **data)
        with pytest.raises(DataError, match="version"):
            load_checkpoint(path)


class TestNodeEmbeddings:
    def test_row_layout(self):
        cfg = _cfg()
        model = ForecastModel(cfg, seed=0)
        sample = _samples(cfg, n=1)[0]
        rows = model.node_embeddings(sample)
        t = cfg.n_patches
        n = len(sample.texts)
        assert len(rows) == 2 * t + n
        assert [m for m, _, _ in rows] == ["series"] * t + ["image"] * t + ["text"] * n
        assert [i for _, i, _ in rows] == list(range(t)) + list(range(t)) + list(range(n))
        assert all(vec.shape == (cfg.d_model,) for _, _, vec in rows)

    def test_graph_helper_matches_config(self):
        cfg = _cfg()
        model = ForecastModel(cfg, seed=0)
        sample = _samples(cfg, n=1)[0]
        graph = model.window_graph(sample)
        assert graph.n_tokens == cfg.n_patches
        assert graph.n_texts == len(sample.texts)

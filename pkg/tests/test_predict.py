import numpy as np
import pytest

from tricast.config import ModelConfig
from tricast.nn import derive_rng
from tricast.predict import (MultiScalePredictor, ScaleHead, SingleScalePredictor,
                             head_iterations)
from tricast.tensor import Tensor, grad_check, tsum


def _cfg(**kw):
    base = dict(lookback=24, horizon=8, n_vars=2, d_model=8, patch_len=8,
                patch_stride=4, head_scales=(3, 5, 10), weight_mlp_hidden=6)
    base.update(kw)
    cfg = ModelConfig(**base)
    cfg.validate()
    return cfg


def _tokens(cfg, batch=2, seed=0):
    rng = np.random.default_rng(seed)
    return Tensor(rng.normal(size=(batch, cfg.n_patches, cfg.d_model)))


class TestIterationCount:
    @pytest.mark.parametrize("horizon", [96, 192, 336, 720])
    @pytest.mark.parametrize("scale", [30, 50, 100])
    def test_ceiling_division(self, horizon, scale):
        want = int(np.ceil(horizon / scale))
        assert head_iterations(horizon, scale) == want

    def test_exact_multiple_needs_no_truncation(self):
        assert head_iterations(90, 30) == 3
        assert head_iterations(91, 30) == 4


class TestScaleHead:
    @pytest.mark.parametrize("horizon,scale", [(96, 30), (96, 50), (96, 100),
                                               (720, 30), (7, 3), (10, 10)])
    def test_output_cut_to_horizon(self, horizon, scale):
        cfg = _cfg(horizon=horizon, head_scales=(scale, scale, scale))
        head = ScaleHead(cfg, scale, derive_rng(0, "h"))
        out = head(Tensor(np.random.default_rng(1).normal(size=(2, cfg.d_model))))
        assert out.shape == (2, horizon, cfg.n_vars)
        assert head.iter_emb.shape[0] == head_iterations(horizon, scale)

    def test_matches_manual_computation(self):
        cfg = _cfg(horizon=8, n_vars=2)
        head = ScaleHead(cfg, 3, derive_rng(2, "h"))
        h_last = np.random.default_rng(3).normal(size=(2, cfg.d_model))
        out = head(Tensor(h_last)).data
        w = head.proj.weight.data
        chunks = [(h_last + head.iter_emb.data[i]) @ w for i in range(3)]
        want = np.concatenate(chunks, axis=1).reshape(2, 9, 2)[:, :8]
        np.testing.assert_allclose(out, want, atol=1e-12)

    def test_projection_is_linear_in_weight(self):
        cfg = _cfg(horizon=6, head_scales=(3, 3, 3))
        head = ScaleHead(cfg, 3, derive_rng(4, "h"))
        head.iter_emb.data[:] = 0.0
        h_last = Tensor(np.random.default_rng(5).normal(size=(2, cfg.d_model)))
        base = head(h_last).data.copy()
        head.proj.weight.data[:] *= 2.0
        np.testing.assert_allclose(head(h_last).data, 2.0 * base, atol=1e-12)


class TestMultiScalePredictor:
    def test_shapes(self):
        cfg = _cfg()
        pred = MultiScalePredictor(cfg, derive_rng(6, "p"))
        per_head, weights, fused = pred(_tokens(cfg))
        assert len(per_head) == 3
        assert all(p.shape == (2, cfg.horizon, cfg.n_vars) for p in per_head)
        assert weights.shape == (2, 3)
        assert fused.shape == (2, cfg.horizon, cfg.n_vars)

    def test_weights_are_convex(self):
        cfg = _cfg()
        pred = MultiScalePredictor(cfg, derive_rng(7, "p"))
        for seed in range(30):
            _, weights, _ = pred(_tokens(cfg, seed=seed))
            w = weights.data
            assert np.all(w >= 0)
            np.testing.assert_allclose(w.sum(axis=-1), 1.0, atol=1e-6)

    def test_fusion_stays_in_per_coordinate_hull(self):
        cfg = _cfg()
        pred = MultiScalePredictor(cfg, derive_rng(8, "p"))
        per_head, _, fused = pred(_tokens(cfg, seed=9))
        stacked = np.stack([p.data for p in per_head])
        assert np.all(fused.data >= stacked.min(axis=0) - 1e-12)
        assert np.all(fused.data <= stacked.max(axis=0) + 1e-12)

    def test_fusion_matches_manual_combination(self):
        cfg = _cfg()
        pred = MultiScalePredictor(cfg, derive_rng(10, "p"))
        per_head, weights, fused = pred(_tokens(cfg, seed=11))
        want = sum(weights.data[:, m][:, None, None] * per_head[m].data
                   for m in range(3))
        np.testing.assert_allclose(fused.data, want, atol=1e-12)

    def test_gradients(self):
        cfg = _cfg(horizon=4, head_scales=(2, 3, 4), d_model=6, weight_mlp_hidden=4)
        pred = MultiScalePredictor(cfg, derive_rng(12, "p"))
        err = grad_check(lambda t: tsum(pred(t)[2]),
                         Tensor(np.random.default_rng(13).normal(size=(2, 3, 6))))
        assert err < 1e-4

    def test_seeded_construction_is_deterministic(self):
        cfg = _cfg()
        a = MultiScalePredictor(cfg, derive_rng(14, "p"))
        b = MultiScalePredictor(cfg, derive_rng(14, "p"))
        for (na, pa), (nb, pb) in zip(a.named_parameters(), b.named_parameters()):
            assert na == nb
            np.testing.assert_array_equal(pa.data, pb.data)


class TestSingleScalePredictor:
    def test_single_head_unit_weight(self):
        cfg = _cfg()
        pred = SingleScalePredictor(cfg, derive_rng(15, "p"))
        per_head, weights, fused = pred(_tokens(cfg))
        assert len(per_head) == 1
        np.testing.assert_array_equal(weights.data, np.ones((2, 1)))
        np.testing.assert_array_equal(per_head[0].data, fused.data)
        assert fused.shape == (2, cfg.horizon, cfg.n_vars)

    def test_uses_last_token_only(self):
        cfg = _cfg()
        pred = SingleScalePredictor(cfg, derive_rng(16, "p"))
        tokens = _tokens(cfg, seed=17)
        base = pred(tokens)[2].data
        other = tokens.data.copy()
        other[:, :-1, :] += 5.0
        np.testing.assert_array_equal(pred(Tensor(other))[2].data, base)

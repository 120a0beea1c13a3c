import pytest

from tricast.config import ModelConfig, TrainConfig, configs_from_dict, load_config, config_hash
from tricast.errors import ConfigError


def test_defaults_validate():
    ModelConfig().validate()
    TrainConfig().validate()


def test_patch_count_formula():
    cfg = ModelConfig(lookback=96, patch_len=16, patch_stride=8)
    assert cfg.n_patches == (96 - 16) // 8 + 1 == 11


def test_patch_grid_must_tile_lookback():
    with pytest.raises(ConfigError):
        ModelConfig(lookback=97, patch_len=16, patch_stride=8).validate()


def test_top_k_bounded_by_experts():
    with pytest.raises(ConfigError):
        ModelConfig(n_experts=2, top_k=3).validate()


def test_exactly_three_head_scales():
    with pytest.raises(ConfigError):
        ModelConfig(head_scales=(30, 50)).validate()


def test_heads_divide_model_dim():
    with pytest.raises(ConfigError):
        ModelConfig(d_model=30, n_heads=4).validate()


def test_unknown_ablation_rejected():
    with pytest.raises(ConfigError):
        ModelConfig(ablation=("no_such_thing",)).validate()


def test_known_ablations_accepted():
    ModelConfig(ablation=("no_graph", "no_ftc")).validate()


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        configs_from_dict({"lookbck": 96})


def test_configs_from_dict_routes_keys():
    model, train = configs_from_dict({"lookback": 48, "patch_len": 8,
                                      "patch_stride": 8, "seed": 7})
    assert model.lookback == 48
    assert train.seed == 7


def test_toml_round_trip(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('lookback = 48\npatch_len = 8\npatch_stride = 4\n'
                    'batch_size = 16\nablation = ["no_multi_scale"]\n')
    model, train = load_config(path)
    assert model.lookback == 48
    assert model.ablation == ("no_multi_scale",)
    assert train.batch_size == 16


def test_nested_tables_rejected(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('[model]\nlookback = 48\n')
    with pytest.raises(ConfigError):
        load_config(path)


def test_config_hash_tracks_content():
    m1, t1 = configs_from_dict({})
    m2, t2 = configs_from_dict({"seed": 1})
    assert config_hash(m1, t1) == config_hash(*configs_from_dict({}))
    assert config_hash(m1, t1) != config_hash(m2, t2)

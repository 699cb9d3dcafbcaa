from pathlib import Path

import pytest

from samba_seg.config import RunConfig, load_config, parse_config
from samba_seg.errors import ConfigError

from conftest import TOY_CONFIG, TOY_ROOT


def test_default_round_trip():
    assert parse_config(RunConfig().to_text()) == RunConfig()


def test_toy_round_trip():
    cfg = load_config(TOY_CONFIG)
    assert parse_config(cfg.to_text()) == cfg
    assert cfg.model.stage_depths == (1, 1, 1, 1) and cfg.decoder.pool_scales == (1, 2)
    assert cfg.train.base_lr == 6e-4 and cfg.train.total_iterations == 500


def test_relative_paths_follow_the_config_file():
    cfg = load_config(TOY_CONFIG)
    assert Path(cfg.data.root) == TOY_ROOT


def test_unknown_key_is_named():
    with pytest.raises(ConfigError, match="train.learning_rate"):
        parse_config("[train]\nlearning_rate = 0.1\n")
    with pytest.raises(ConfigError, match="model.dpeth"):
        parse_config("", {"model.dpeth": "2"})
    with pytest.raises(ConfigError, match="optimizer"):
        parse_config("[optimizer]\nlr = 1\n")


def test_bad_values():
    with pytest.raises(ConfigError, match="train.batch_size"):
        parse_config("[train]\nbatch_size = four\n")
    with pytest.raises(ConfigError, match="crop_size"):
        parse_config("[augment]\ncrop_size = 100\n")


def test_overrides_win_over_file():
    cfg = parse_config("[train]\ntotal_iterations = 10\nwarmup_iterations = 2\n",
                       {"train.total_iterations": "1", "train.warmup_iterations": "0",
                        "data.exclude_classes": "5, 6"})
    assert cfg.train.total_iterations == 1 and cfg.data.exclude_classes == (5, 6)


def test_comments_and_case():
    cfg = parse_config("# header\n[decoder]\nnum_classes = 6  # six\n")
    assert cfg.decoder.num_classes == 6
    with pytest.raises(ConfigError):
        parse_config("[decoder]\nNum_Classes = 6\n")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")

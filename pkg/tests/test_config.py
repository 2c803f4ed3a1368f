"""Unit tests for the key=value configuration layer."""

import pytest

from models.config import GeneratorConfig, TrainConfig
from utils.config_loader import (
    build_train_config,
    default_seed,
    dump_key_value,
    load_train_config,
    parse_key_value_text,
)
from utils.exceptions import ConfigError


class TestParsing:
    """Test the line format."""

    def test_comments_and_blank_lines(self):
        text = "# header\n\nsteps = 10  # inline\nweights.mcc=5\n"
        assert parse_key_value_text(text) == {"steps": "10", "weights.mcc": "5"}

    def test_duplicate_key(self):
        """Test a key given twice is rejected with its line number."""
        with pytest.raises(ConfigError, match=":2:"):
            parse_key_value_text("steps=1\nsteps=2")

    def test_missing_equals(self):
        with pytest.raises(ConfigError):
            parse_key_value_text("steps 10")

    def test_empty_key(self):
        with pytest.raises(ConfigError):
            parse_key_value_text("=3")


class TestTrainConfig:
    """Test building and validating training configs."""

    def test_nested_keys(self):
        config = build_train_config({"steps": "7", "generator.levels": "2", "weights.gan": "0.5"})
        assert config.steps == 7
        assert config.generator.levels == 2
        assert config.weights.gan == 0.5
        assert config.generator.base_channels == GeneratorConfig().base_channels

    def test_unknown_key(self):
        """Test typos are rejected instead of silently ignored."""
        with pytest.raises(ConfigError, match="unknown config key"):
            build_train_config({"stpes": "7"})

    def test_unknown_sub_key(self):
        with pytest.raises(ConfigError):
            build_train_config({"generator.depth": "3"})

    def test_sub_key_on_scalar(self):
        with pytest.raises(ConfigError):
            build_train_config({"steps.max": "3"})

    def test_invalid_value(self):
        with pytest.raises(ConfigError):
            build_train_config({"steps": "0"})

    def test_domain_counts_must_agree(self):
        with pytest.raises(ConfigError):
            build_train_config({"generator.n_domains": "3"})

    def test_overrides_win_over_file(self, tmp_path):
        """Test explicit overrides beat file values and None overrides are ignored."""
        path = tmp_path / "train.cfg"
        path.write_text("steps=20\nseed=4\n")
        config = load_train_config(path, {"steps": 3, "seed": None})
        assert (config.steps, config.seed) == (3, 4)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_train_config(tmp_path / "absent.cfg")

    def test_dump_round_trip(self, train_config, tmp_path):
        """Test a dumped config loads back equal."""
        path = tmp_path / "dumped.cfg"
        path.write_text(dump_key_value(train_config))
        assert load_train_config(path) == train_config

    def test_dump_is_dotted(self):
        text = dump_key_value(TrainConfig())
        assert "generator.levels=2" in text.splitlines()
        assert "val_max_images" not in text


class TestEnvironment:
    """Test environment-provided defaults."""

    def test_default_seed(self, monkeypatch):
        monkeypatch.setenv("COLLAGAN_DEFAULT_SEED", "17")
        assert default_seed() == 17

    def test_default_seed_unset(self, monkeypatch):
        monkeypatch.delenv("COLLAGAN_DEFAULT_SEED", raising=False)
        assert default_seed() == 0

    def test_bad_default_seed(self, monkeypatch):
        monkeypatch.setenv("COLLAGAN_DEFAULT_SEED", "seven")
        with pytest.raises(ConfigError):
            default_seed()

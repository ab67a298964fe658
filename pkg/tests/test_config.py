import json

import pytest
from pydantic import ValidationError

from app.core.config import Settings
from app.schemas.config import ConfigException, ForestParams, PipelineConfig, load_pipeline_config
from app.services.command_factory import CommandFactory


class TestSettings:
    def test_log_level_is_normalized(self):
        assert Settings(LOG_LEVEL="warning").LOG_LEVEL == "WARNING"

    def test_unknown_log_level_is_rejected(self):
        with pytest.raises(ValidationError):
            Settings(LOG_LEVEL="LOUD")

    def test_debug_flag_overrides_level(self):
        assert Settings(DEBUG=True, LOG_LEVEL="ERROR").log_level == "DEBUG"
        assert Settings(DEBUG=False, LOG_LEVEL="ERROR").log_level == "ERROR"


class TestPipelineConfig:
    def test_defaults(self):
        cfg = PipelineConfig()
        assert cfg.theta_sim == 0.7
        assert cfg.theta_conf == 0.4
        assert cfg.initial_window_T == 600.0
        assert cfg.quantile_R == 95.0
        assert cfg.bin_width == 2.0
        assert cfg.sigma_scale == 60.0
        assert cfg.forest == ForestParams()
        assert cfg.stride_for(120.0) == 60.0
        assert PipelineConfig(series_stride=30.0).stride_for(120.0) == 30.0

    @pytest.mark.parametrize("field, value", [
        ("theta_sim", 0.0),
        ("theta_sim", 1.0),
        ("theta_conf", 1.2),
        ("quantile_R", 100.0),
        ("initial_window_T", -1.0),
        ("max_iterations", -1),
    ])
    def test_out_of_range_values_are_rejected(self, field, value):
        with pytest.raises(ValidationError):
            PipelineConfig(**{field: value})

    def test_bin_width_must_be_below_window(self):
        with pytest.raises(ValidationError):
            PipelineConfig(initial_window_T=10.0, bin_width=10.0)

    def test_unknown_key_is_rejected(self):
        with pytest.raises(ValidationError):
            PipelineConfig(theta=0.5)


class TestLoadPipelineConfig:
    def test_default_and_seed_override(self):
        assert load_pipeline_config("default") == PipelineConfig()
        assert load_pipeline_config(None, seed=9).seed == 9

    def test_file_values_and_seed_override(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"theta_sim": 0.6, "seed": 3, "forest": {"n_trees": 7}}))
        cfg = load_pipeline_config(str(path))
        assert cfg.theta_sim == 0.6
        assert cfg.seed == 3
        assert cfg.forest.n_trees == 7
        assert load_pipeline_config(str(path), seed=5).seed == 5

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_pipeline_config(str(tmp_path / "absent.json"))

    @pytest.mark.parametrize("content", [b"{not json", b"\xff\xfe", b"[1, 2]"])
    def test_unreadable_file_names_the_path(self, tmp_path, content):
        path = tmp_path / "cfg.json"
        path.write_bytes(content)
        with pytest.raises(ConfigException, match="cfg.json"):
            load_pipeline_config(str(path))


def test_all_commands_are_registered():
    import app.services.commands  # noqa: F401

    assert set(CommandFactory.get_supported_commands()) >= {
        "simulate", "train", "test", "baseline", "evaluate", "dump-plots",
    }
    assert CommandFactory.get_command_info("train")["name"] == "train"
    assert CommandFactory.get_command("nonsense") is None

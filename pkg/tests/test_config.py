import pytest

from rtfsnet.config import ModelConfig, load_config
from rtfsnet.errors import ConfigError


class TestConfig:
    def test_defaults(self):
        c = ModelConfig()
        assert (c.window, c.hop, c.audio_channels, c.block_channels, c.compress_depth) == (256, 128, 256, 64, 2)
        assert c.freq_bins == 129 and c.frames(32000) == 251

    def test_json_round_trip(self):
        c = ModelConfig(num_blocks=12)
        assert ModelConfig.from_json(c.to_json()) == c

    def test_aliases_in_overrides(self):
        c = ModelConfig().with_overrides(["R=12", "q=3", "num_blocks=6"])
        assert c.num_blocks == 6 and c.compress_depth == 3

    def test_aliases_in_json(self):
        assert ModelConfig.from_json('{"R": 6}').num_blocks == 6

    @pytest.mark.parametrize("bad", ["R", "R=x", "nonsense=3", "R=0"])
    def test_bad_overrides(self, bad):
        with pytest.raises(ConfigError):
            ModelConfig().with_overrides([bad])

    @pytest.mark.parametrize("kwargs", [
        {"audio_channels": 255}, {"visual_channels": 300}, {"block_channels": 256},
        {"num_blocks": 0}, {"hop": 512}, {"block_channels": 62},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            ModelConfig(**kwargs)

    def test_unknown_json_key(self):
        with pytest.raises(ConfigError, match="mystery"):
            ModelConfig.from_json('{"mystery": 1}')

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "none.json")

    def test_load_file(self, tmp_path):
        (tmp_path / "c.json").write_text('{"num_blocks": 12}')
        assert load_config(tmp_path / "c.json").num_blocks == 12

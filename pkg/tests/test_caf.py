import numpy as np
import pytest

from rtfsnet import caf
from rtfsnet import tensor as tn
from rtfsnet.errors import ShapeError
from rtfsnet.model import init_random, zero_biases
from rtfsnet.config import ModelConfig


@pytest.fixture
def cfg():
    return ModelConfig(window=32, hop=16, audio_channels=8, block_channels=4, visual_channels=16,
                       vp_hidden=8, vp_ffn=16)


@pytest.fixture
def weights(cfg):
    return dict(init_random(cfg, 3).scope("caf").items())


def rand_inputs(rng, cfg, ta=11, tv=4):
    a1 = rng.standard_normal((cfg.audio_channels, ta, cfg.freq_bins))
    v1 = rng.standard_normal((cfg.visual_channels, tv))
    return a1, v1


class TestCaf:
    def test_default_shapes(self, rng):
        cfg = ModelConfig()
        w = dict(init_random(cfg, 0).scope("caf").items())
        a1 = rng.standard_normal((256, 251, 129)).astype(np.float32)
        v1 = rng.standard_normal((512, 50)).astype(np.float32)
        assert caf.caf_forward(a1, v1, w, 4).shape == (256, 251, 129)

    def test_param_count(self):
        assert sum(s.size for s in caf.param_specs(256, 512, 4)) == 6656

    def test_uniform_attention(self, cfg, weights, rng):
        a1, _ = rand_inputs(rng, cfg)
        # v1 = 0 makes every head constant over channels, so the softmax is uniform
        v1 = np.zeros((cfg.visual_channels, 4))
        attn = caf.visual_attention(v1, weights, cfg.audio_channels, cfg.fusion_heads, 11)
        np.testing.assert_allclose(attn, 1.0 / cfg.audio_channels)
        a_val = tn.global_layer_norm(tn.conv2d(a1, weights["value.weight"], groups=8),
                                     weights["value_norm.weight"], weights["value_norm.bias"])
        zero_key = dict(weights, **{"key.weight": np.zeros_like(weights["key.weight"])})
        np.testing.assert_allclose(caf.caf_forward(a1, v1, zero_key, 4), a_val / 8, atol=1e-12)

    def test_zero_audio_gives_zero(self, cfg, rng):
        w = dict(zero_biases(init_random(cfg, 3)).scope("caf").items())
        _, v1 = rand_inputs(rng, cfg)
        out = caf.caf_forward(np.zeros((8, 11, cfg.freq_bins)), v1, w, 4)
        assert not np.any(out)

    def test_f1_bounded_by_value(self, cfg, weights, rng):
        a1, v1 = rand_inputs(rng, cfg)
        attn = caf.visual_attention(v1, weights, 8, 4, 11)
        assert np.all((attn > 0) & (attn < 1))
        a_val = tn.global_layer_norm(tn.conv2d(a1, weights["value.weight"], groups=8),
                                     weights["value_norm.weight"], weights["value_norm.bias"])
        assert np.all(np.abs(attn[:, :, None] * a_val) <= np.abs(a_val))

    def test_f2_nonnegative_with_positive_key(self, cfg, weights, rng):
        a1, v1 = rand_inputs(rng, cfg)
        w = dict(weights)
        w["key_norm.weight"] = np.zeros(8)
        w["key_norm.bias"] = np.full(8, 0.7)  # forces v_key = 0.7 > 0
        w["attn_norm.weight"] = np.zeros(32)  # and f1 = a_val / C_a ...
        w["value.weight"] = np.zeros_like(w["value.weight"])  # ... with a_val = 0
        w["value_norm.bias"] = np.zeros(8)
        assert caf.caf_forward(a1, v1, w, 4).min() >= 0

    def test_identical_heads_average_to_one_head(self, cfg, weights, rng):
        _, v1 = rand_inputs(rng, cfg)
        w = dict(weights)
        blocks = w["attn.weight"].reshape(8, 4, 2, 1)
        w["attn.weight"] = np.repeat(blocks[:, :1], 4, axis=1).reshape(32, 2, 1)
        vh = tn.global_layer_norm(tn.conv1d(v1, w["attn.weight"], groups=8),
                                  w["attn_norm.weight"], w["attn_norm.bias"])
        vm = vh.reshape(8, 4, -1).mean(axis=1)
        np.testing.assert_allclose(vm, vh.reshape(8, 4, -1)[:, 0], atol=1e-12)

    def test_output_shape_any_visual_length(self, cfg, weights, rng):
        for tv in (1, 3, 20):
            a1, v1 = rand_inputs(rng, cfg, tv=tv)
            assert caf.caf_forward(a1, v1, weights, 4).shape == a1.shape

    def test_channel_mismatch(self, cfg, weights, rng):
        a1, _ = rand_inputs(rng, cfg)
        with pytest.raises(ShapeError):
            caf.caf_forward(a1, rng.standard_normal((12, 4)), weights, 4)

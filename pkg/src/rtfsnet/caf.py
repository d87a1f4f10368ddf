"""Cross-dimensional attention fusion of visual cues into the 3D audio features."""

from __future__ import annotations

from typing import Mapping

from . import tensor as tn
from .errors import ShapeError
from .store import conv_specs, norm_specs


def param_specs(audio_channels: int, visual_channels: int, heads: int):
    ca, cv, h = audio_channels, visual_channels, heads
    return [
        *conv_specs("value", ca, ca, (1, 1), groups=ca, bias=False),
        *norm_specs("value_norm", ca),
        *conv_specs("gate", ca, ca, (1, 1), groups=ca, bias=False),
        *norm_specs("gate_norm", ca),
        *conv_specs("attn", ca * h, cv, (1,), groups=ca, bias=False),
        *norm_specs("attn_norm", ca * h),
        *conv_specs("key", ca, cv, (1,), groups=ca, bias=False),
        *norm_specs("key_norm", ca),
    ]


def visual_attention(v1, w: Mapping, audio_channels: int, heads: int, frames: int):
    """Per-frame channel attention from the visual stream, stretched to ``frames``.

    The grouped conv emits ``heads`` sub-features per audio channel (channel
    ``c * heads + k`` is head ``k`` of channel ``c``); heads are averaged and a
    softmax over channels turns each frame into weights summing to one.
    """
    ca = audio_channels
    vh = tn.conv1d(v1, w["attn.weight"], groups=ca)
    vh = tn.global_layer_norm(vh, w["attn_norm.weight"], w["attn_norm.bias"])
    vm = vh.reshape(ca, heads, -1).mean(axis=1)
    return tn.interp_nearest(tn.softmax(vm, axis=0), frames)


def visual_key(v1, w: Mapping, audio_channels: int, frames: int):
    vk = tn.conv1d(v1, w["key.weight"], groups=audio_channels)
    vk = tn.global_layer_norm(vk, w["key_norm.weight"], w["key_norm.bias"])
    return tn.interp_nearest(vk, frames)


def caf_forward(a1, v1, w: Mapping, heads: int = 4):
    """Fuse ``v1`` ``(C_v, T_v)`` into ``a1`` ``(C_a, T_a, F)``; output has ``a1``'s shape."""
    ca, ta, _ = tn.primal(a1).shape
    cv = tn.primal(v1).shape[0]
    if cv % ca:
        raise ShapeError(f"visual channels {cv} not divisible by audio channels {ca}")
    if w["key.weight"].shape != (ca, cv // ca, 1):
        raise ShapeError(f"fusion weights do not match audio {ca} / visual {cv} channels")
    a_val = tn.global_layer_norm(tn.conv2d(a1, w["value.weight"], groups=ca),
                                 w["value_norm.weight"], w["value_norm.bias"])
    a_gate = tn.relu(tn.global_layer_norm(tn.conv2d(a1, w["gate.weight"], groups=ca),
                                          w["gate_norm.weight"], w["gate_norm.bias"]))
    v_attn = visual_attention(v1, w, ca, heads, ta)
    v_key = visual_key(v1, w, ca, ta)
    f1 = v_attn[:, :, None] * a_val
    f2 = a_gate * v_key[:, :, None]
    return f1 + f2

"""Visual preprocessing block: a 1D compress / attend / reconstruct pass over lip features.

All normalization is inference-mode batch norm, i.e. a fixed per-channel affine.
"""

from __future__ import annotations

import math
from typing import Mapping

from . import tensor as tn
from .errors import ShapeError
from .rtfs import KERNEL, SAME, reconstruct, tf_ar_unit, unit_specs
from .store import ParamSpec, batch_norm_specs, conv_specs

FFN_KERNEL = 5


def param_specs(cfg) -> list[ParamSpec]:
    cv, hd, f = cfg.visual_channels, cfg.vp_hidden, cfg.vp_ffn
    specs = [*conv_specs("reduce", hd, cv, (1,)), *batch_norm_specs("reduce_norm", hd),
             ParamSpec("reduce_act", (hd,), "slope")]
    for i in range(cfg.vp_depth):
        specs += conv_specs(f"down.{i}", hd, hd, (KERNEL,), groups=hd)
        specs += batch_norm_specs(f"down_norm.{i}", hd)
    specs += batch_norm_specs("attn.norm", hd)
    for name in ("query", "key", "value", "out"):
        specs += conv_specs(f"attn.{name}", hd, hd, (1,))
    specs += batch_norm_specs("ffn.norm", hd)
    specs += conv_specs("ffn.expand", f, hd, (1,))
    specs += conv_specs("ffn.dwconv", f, f, (FFN_KERNEL,), groups=f)
    specs += conv_specs("ffn.project", hd, f, (1,))
    scales = cfg.vp_depth + 1
    for i in range(scales):
        specs += unit_specs(f"fuse.{i}", hd, (KERNEL,), batch_norm_specs)
    for j in range(scales - 1):
        specs += unit_specs(f"up.{j}", hd, (KERNEL,), batch_norm_specs)
    specs += conv_specs("restore", cv, hd, (1,))
    return specs


def _bn(x, w: Mapping):
    return tn.batch_norm(x, w["weight"], w["bias"], w["running_mean"], w["running_var"])


def _conv1d_same(x, weight):
    return tn.conv1d(x, weight, padding=SAME, groups=tn.primal(x).shape[0])


def _unit(m, n, w: Mapping):
    return tf_ar_unit(m, n, w, conv=_conv1d_same, norm=_bn)


def self_attention(x, w: Mapping, heads: int):
    """Multi-head self-attention over frames of a ``(C, T)`` sequence (no residual)."""
    c, t = tn.primal(x).shape
    dh = c // heads

    def split(name):
        y = tn.conv1d(x, w[f"{name}.weight"], w[f"{name}.bias"])
        return y.reshape(heads, dh, t)

    q, k, v = split("query"), split("key"), split("value")
    scores = tn.matmul(q.transpose(0, 2, 1), k) * (1.0 / math.sqrt(dh))  # (heads, T, T)
    attn = tn.softmax(scores, axis=-1)
    o = tn.matmul(v, attn.transpose(0, 2, 1)).reshape(c, t)
    return tn.conv1d(o, w["out.weight"], w["out.bias"])


def feed_forward(x, w: Mapping):
    y = tn.relu(tn.conv1d(x, w["expand.weight"], w["expand.bias"]))
    y = tn.conv1d(y, w["dwconv.weight"], w["dwconv.bias"], padding=FFN_KERNEL // 2,
                  groups=tn.primal(y).shape[0])
    return tn.conv1d(y, w["project.weight"], w["project.bias"])


def attention_block(x, w: Mapping, heads: int):
    """Pre-norm transformer layer with its own internal residuals."""
    y = x + self_attention(_bn(x, w.scope("attn.norm")), w.scope("attn"), heads)
    return y + feed_forward(_bn(y, w.scope("ffn.norm")), w.scope("ffn"))


def vp_forward(v0, w: Mapping, cfg):
    """``(C_v, T_v)`` -> ``(C_v, T_v)``, including the outer input residual."""
    dims = tn.primal(v0).shape
    if len(dims) != 2 or dims[0] != cfg.visual_channels:
        raise ShapeError(f"visual features must be ({cfg.visual_channels}, T_v), got {dims}")
    if dims[1] < 2 ** cfg.vp_depth:
        raise ShapeError(f"visual sequence of {dims[1]} frames is shorter than "
                         f"{2 ** cfg.vp_depth} needed for {cfg.vp_depth} downsamplings")
    x = tn.conv1d(v0, w["reduce.weight"], w["reduce.bias"])
    x = tn.prelu(_bn(x, w.scope("reduce_norm")), w["reduce_act"])
    scales = [x]
    for i in range(cfg.vp_depth):
        y = tn.conv1d(scales[-1], w[f"down.{i}.weight"], w[f"down.{i}.bias"], stride=2,
                      padding=1, groups=cfg.vp_hidden)
        scales.append(_bn(y, w.scope(f"down_norm.{i}")))
    coarse = tn.primal(scales[-1]).shape[1]
    pooled = scales[-1]
    for s in scales[:-1]:
        pooled = pooled + tn.adaptive_avg_pool(s, coarse)
    g = attention_block(pooled, w, cfg.vp_heads) + pooled
    y = reconstruct(scales, g, w, unit=_unit)
    return tn.conv1d(y, w["restore.weight"], w["restore.bias"]) + v0

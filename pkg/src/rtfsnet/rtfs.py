"""The RTFS block: compress, model time and frequency, reconstruct.

A ``(C_a, T, F)`` map is reduced to ``D`` channels, downsampled into a
pyramid of ``q`` scales, pooled to the coarsest resolution and summed. Two
SRU passes (along frequency, then along time) and a time-frequency attention
run on that compact map before gated interpolation units rebuild the full
resolution.
"""

from __future__ import annotations

import math
from typing import Callable, Mapping

from . import tensor as tn
from .errors import ShapeError
from .sru import SruShape
from .sru import sru_batch
from .store import ParamSpec, conv_specs, norm_specs, tconv_specs

# depthwise kernel used by both the downsamplers and the fusion units
KERNEL = 4
SAME = tn.same_padding(KERNEL)


def downsampled(n: int, steps: int) -> int:
    """Length after ``steps`` stride-2, kernel-4, pad-1 convolutions."""
    for _ in range(steps):
        n = (n + 2 - KERNEL) // 2 + 1
        if n < 1:
            raise ShapeError("input too short for the requested compression depth")
    return n


def sru_shape(cfg) -> SruShape:
    return SruShape(cfg.block_channels * cfg.unfold_kernel, cfg.sru_hidden, cfg.sru_layers)


def _path_specs(prefix: str, cfg) -> list[ParamSpec]:
    d, k = cfg.block_channels, cfg.unfold_kernel
    shape = sru_shape(cfg)
    specs = norm_specs(f"{prefix}.norm", d * k)
    for name, dims in shape.tensor_shapes().items():
        kind = "bias" if ".b_" in name else "weight"
        fan_in = dims[1] if len(dims) == 2 else cfg.sru_hidden
        specs.append(ParamSpec(f"{prefix}.sru.{name}", dims, kind, fan_in))
    specs += tconv_specs(f"{prefix}.proj", shape.output_size, d, (k,))
    return specs


def _attn_branch_specs(prefix: str, c_in: int, c_out: int, bins: int) -> list[ParamSpec]:
    return [*conv_specs(f"{prefix}.conv", c_out, c_in, (1, 1)),
            ParamSpec(f"{prefix}.act", (c_out,), "slope"),
            *norm_specs(f"{prefix}.norm", (c_out, bins))]


def unit_specs(prefix: str, channels: int, kernel: tuple, norm=norm_specs) -> list[ParamSpec]:
    """One gated interpolation unit: three depthwise convs, each normalized."""
    specs = []
    for branch in ("gate", "local", "global"):
        specs += conv_specs(f"{prefix}.{branch}", channels, channels, kernel, groups=channels,
                            bias=False)
        specs += norm(f"{prefix}.{branch}_norm", channels)
    return specs


def param_specs(cfg) -> list[ParamSpec]:
    ca, d, q = cfg.audio_channels, cfg.block_channels, cfg.compress_depth
    bins = downsampled(cfg.freq_bins, q - 1)
    specs = conv_specs("reduce", d, ca, (1, 1))
    for i in range(q - 1):
        specs += conv_specs(f"down.{i}", d, d, (KERNEL, KERNEL), groups=d)
    specs += _path_specs("freq", cfg) + _path_specs("time", cfg)
    e, dv = cfg.attn_qk_channels, d // cfg.attn_heads
    for hd in range(cfg.attn_heads):
        specs += _attn_branch_specs(f"attn.{hd}.query", d, e, bins)
        specs += _attn_branch_specs(f"attn.{hd}.key", d, e, bins)
        specs += _attn_branch_specs(f"attn.{hd}.value", d, dv, bins)
    specs += _attn_branch_specs("attn.out", d, d, bins)
    for i in range(q):
        specs += unit_specs(f"fuse.{i}", d, (KERNEL, KERNEL))
    for j in range(q - 1):
        specs += unit_specs(f"up.{j}", d, (KERNEL, KERNEL))
    specs += conv_specs("restore", ca, d, (1, 1))
    return specs


# --------------------------------------------------------------------------
# compression
# --------------------------------------------------------------------------


def compress(a, w: Mapping, depth: int):
    """Return the ``depth`` scales (finest first) and their pooled sum."""
    x = tn.conv2d(a, w["reduce.weight"], w["reduce.bias"])
    d = tn.primal(x).shape[0]
    scales = [x]
    for i in range(depth - 1):
        scales.append(tn.conv2d(scales[-1], w[f"down.{i}.weight"], w[f"down.{i}.bias"],
                                stride=2, padding=1, groups=d))
    target = tn.primal(scales[-1]).shape[1:]
    pooled = scales[-1]
    for s in scales[:-1]:
        pooled = pooled + tn.adaptive_avg_pool(s, target)
    return scales, pooled


# --------------------------------------------------------------------------
# dual-path recurrent modelling
# --------------------------------------------------------------------------


def sequence_path(x, w: Mapping, cfg):
    """Unfold the last axis, run the SRU along it, project back and add ``x``."""
    d, t, f = tn.primal(x).shape
    k, s = cfg.unfold_kernel, cfg.unfold_stride
    u = tn.unfold_freq(x, k, s)
    u = tn.channel_layer_norm(u, w["norm.weight"], w["norm.bias"])
    y = sru_batch(u.transpose(1, 2, 0), w.scope("sru"), sru_shape(cfg))  # (T, F', 2h)
    y = y.transpose(2, 0, 1)
    proj = w["proj.weight"][:, :, None, :]
    y = tn.conv_transpose2d(y, proj, w["proj.bias"], stride=(1, s))
    return y[:, :, :f] + x


def dual_path(x, w: Mapping, cfg):
    """Frequency path, then time path, each with its own weights and residual."""
    x = sequence_path(x, w.scope("freq"), cfg)
    x = sequence_path(x.transpose(0, 2, 1), w.scope("time"), cfg)
    return x.transpose(0, 2, 1)


def _branch(x, w: Mapping):
    y = tn.prelu(tn.conv2d(x, w["conv.weight"], w["conv.bias"]), w["act"])
    return tn.frame_layer_norm(y, w["norm.weight"], w["norm.bias"])


def tf_attention(x, w: Mapping, heads: int):
    """Multi-head self-attention across time frames; each frame is a (C, F) token.

    Returns the projected attention output without the residual.
    """
    d, t, f = tn.primal(x).shape
    outs = []
    for hd in range(heads):
        hw = w.scope(str(hd))
        q = _branch(x, hw.scope("query"))
        k = _branch(x, hw.scope("key"))
        v = _branch(x, hw.scope("value"))
        e, dv = tn.primal(q).shape[0], tn.primal(v).shape[0]
        qm = q.transpose(1, 0, 2).reshape(t, e * f)
        km = k.transpose(1, 0, 2).reshape(t, e * f)
        vm = v.transpose(1, 0, 2).reshape(t, dv * f)
        scores = tn.matmul(qm, km.transpose(1, 0)) * (1.0 / math.sqrt(e * f))
        o = tn.matmul(tn.softmax(scores, axis=-1), vm)
        outs.append(o.reshape(t, dv, f).transpose(1, 0, 2))
    return _branch(tn.concat(outs, axis=0), w.scope("out"))


# --------------------------------------------------------------------------
# reconstruction
# --------------------------------------------------------------------------


def _conv2d_same(x, weight):
    return tn.conv2d(x, weight, padding=(SAME, SAME), groups=tn.primal(x).shape[0])


def tf_ar_unit(m, n, w: Mapping, conv: Callable = _conv2d_same,
               norm: Callable = None):
    """Gated interpolation: ``up(sigmoid(W1 n)) * W2 m + up(W3 n)``.

    ``n`` may be coarser than ``m`` and is stretched by nearest neighbour.
    ``norm(y, scope)`` defaults to global layer norm.
    """
    norm = norm or (lambda y, s: tn.global_layer_norm(y, s["weight"], s["bias"]))
    size = tn.primal(m).shape[1:]
    if any(a > b for a, b in zip(tn.primal(n).shape[1:], size)):
        raise ShapeError(f"interpolation source {tn.primal(n).shape} larger than target "
                         f"{tn.primal(m).shape}")
    gate = norm(conv(n, w["gate.weight"]), w.scope("gate_norm"))
    local = norm(conv(m, w["local.weight"]), w.scope("local_norm"))
    glob = norm(conv(n, w["global.weight"]), w.scope("global_norm"))
    return tn.interp_nearest(tn.sigmoid(gate), size) * local + tn.interp_nearest(glob, size)


def reconstruct(scales, context, w: Mapping, unit: Callable = tf_ar_unit):
    """Inject ``context`` into every scale, then merge coarse to fine with skips."""
    q = len(scales)
    fused = [unit(scales[i], context, w.scope(f"fuse.{i}")) for i in range(q)]
    out = fused[-1]
    for j in range(q - 2, -1, -1):
        out = unit(fused[j], out, w.scope(f"up.{j}")) + scales[j]
    return out


def rtfs_forward(a, w: Mapping, cfg):
    """One application of the block; the caller adds any residual."""
    if tn.primal(a).ndim != 3 or tn.primal(a).shape[0] != cfg.audio_channels:
        raise ShapeError(f"RTFS block expects ({cfg.audio_channels}, T, F), got "
                         f"{tn.primal(a).shape}")
    scales, pooled = compress(a, w, cfg.compress_depth)
    g = dual_path(pooled, w, cfg)
    g = tf_attention(g, w.scope("attn"), cfg.attn_heads) + g
    y = reconstruct(scales, g, w)
    return tn.conv2d(y, w["restore.weight"], w["restore.bias"])

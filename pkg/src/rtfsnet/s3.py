"""Spectral source separation: complex-valued masking over paired channel halves."""

from __future__ import annotations

from typing import Mapping

from . import tensor as tn
from .errors import ShapeError
from .store import ParamSpec, conv_specs


def param_specs(audio_channels: int):
    ca = audio_channels
    return [ParamSpec("prelu", (ca,), "slope"), *conv_specs("conv", ca, ca, (1, 1))]


def make_mask(a_r, w: Mapping):
    """``relu(conv1x1(prelu(a_r)))``: a nonnegative ``(C_a, T, F)`` mask."""
    x = tn.prelu(a_r, w["prelu"])
    return tn.relu(tn.conv2d(x, w["conv.weight"], w["conv.bias"]))


def _halves(x):
    c = tn.primal(x).shape[0]
    if c % 2:
        raise ShapeError(f"complex split needs an even channel count, got {c}")
    return x[: c // 2], x[c // 2:]


def s3_apply(mask, a0):
    """Multiply mask and features as complex numbers (top half real, bottom half imaginary)."""
    if tn.primal(mask).shape != tn.primal(a0).shape:
        raise ShapeError(f"mask {tn.primal(mask).shape} vs features {tn.primal(a0).shape}")
    m_r, m_i = _halves(mask)
    e_r, e_i = _halves(a0)
    z_r = m_r * e_r - m_i * e_i
    z_i = m_r * e_i + m_i * e_r
    return tn.concat([z_r, z_i], axis=0)


def mask_apply_baseline(mask, a0):
    """Plain elementwise masking, kept for comparison with :func:`s3_apply`."""
    if tn.primal(mask).shape != tn.primal(a0).shape:
        raise ShapeError(f"mask {tn.primal(mask).shape} vs features {tn.primal(a0).shape}")
    return mask * a0

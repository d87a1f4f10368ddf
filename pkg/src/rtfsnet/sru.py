"""Simple Recurrent Unit stacks.

Per layer and direction, with ``x~, f^, r^`` the three thirds of ``W x_t``::

    f_t = sigmoid(f^_t + v_f * c_{t-1} + b_f)
    c_t = f_t * c_{t-1} + (1 - f_t) * x~_t
    r_t = sigmoid(r^_t + v_r * c_t + b_r)
    h_t = r_t * c_t + (1 - r_t) * highway(x_t)

The highway input is ``x_t`` itself when the layer's input width equals its
output width (for a bidirectional layer each direction reads its own half),
and a learned ``(h, d_in)`` projection of ``x_t`` otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import tensor as tn
from .errors import ShapeError

DIRECTIONS = ("fwd", "bwd")


@dataclass(frozen=True)
class SruShape:
    input_size: int
    hidden: int
    num_layers: int = 4
    bidirectional: bool = True

    @property
    def num_directions(self) -> int:
        return 2 if self.bidirectional else 1

    @property
    def output_size(self) -> int:
        return self.hidden * self.num_directions

    def layer_input(self, layer: int) -> int:
        return self.input_size if layer == 0 else self.output_size

    def needs_projection(self, layer: int) -> bool:
        return self.layer_input(layer) != self.output_size

    def tensor_shapes(self) -> dict[str, tuple]:
        """Relative tensor names and shapes making up the stack."""
        h = self.hidden
        shapes = {}
        for layer in range(self.num_layers):
            d_in = self.layer_input(layer)
            for direction in DIRECTIONS[: self.num_directions]:
                p = f"{layer}.{direction}"
                shapes[f"{p}.weight"] = (3 * h, d_in)
                if self.needs_projection(layer):
                    shapes[f"{p}.highway"] = (h, d_in)
                for name in ("v_forget", "v_reset", "b_forget", "b_reset"):
                    shapes[f"{p}.{name}"] = (h,)
        return shapes


def _direction(x, w: Mapping, prefix: str, hidden: int, highway_slice):
    """Run one direction over ``x`` of shape ``(B, N, d_in)``; returns ``(B, N, h)``."""
    proj = tn.linear(x, w[f"{prefix}.weight"])
    cand, fgate, rgate = proj[..., :hidden], proj[..., hidden:2 * hidden], proj[..., 2 * hidden:]
    if f"{prefix}.highway" in w:
        skip = tn.linear(x, w[f"{prefix}.highway"])
    elif highway_slice is None:
        skip = x
    else:
        skip = x[..., highway_slice]
    v_f, v_r = w[f"{prefix}.v_forget"], w[f"{prefix}.v_reset"]
    b_f, b_r = w[f"{prefix}.b_forget"], w[f"{prefix}.b_reset"]
    batch, steps = tn.primal(x).shape[:2]
    c = np.zeros((batch, hidden), dtype=tn.primal(x).dtype)
    outputs = []
    for t in range(steps):
        f = tn.sigmoid(fgate[:, t] + v_f * c + b_f)
        c = f * c + (1.0 - f) * cand[:, t]
        r = tn.sigmoid(rgate[:, t] + v_r * c + b_r)
        outputs.append(r * c + (1.0 - r) * skip[:, t])
    return tn.stack(outputs, axis=1)


def sru_batch(x, w: Mapping, shape: SruShape):
    """Apply the stack to a batch of sequences ``(B, N, d_in)`` -> ``(B, N, out)``."""
    dims = tn.primal(x).shape
    if len(dims) != 3 or dims[2] != shape.input_size:
        raise ShapeError(f"SRU expects (B, N, {shape.input_size}), got {dims}")
    if dims[1] == 0:
        raise ShapeError("SRU needs at least one time step")
    h = shape.hidden
    for layer in range(shape.num_layers):
        outs = []
        for d, direction in enumerate(DIRECTIONS[: shape.num_directions]):
            highway = slice(d * h, (d + 1) * h) if shape.bidirectional else None
            seq = tn.flip(x, 1) if direction == "bwd" else x
            y = _direction(seq, w, f"{layer}.{direction}", h, highway)
            outs.append(tn.flip(y, 1) if direction == "bwd" else y)
        x = tn.concat(outs, axis=-1) if len(outs) > 1 else outs[0]
    return tn.check_finite(x, "sru")


def sru_forward(seq, w: Mapping, shape: SruShape):
    """Single sequence ``(d_in, N)`` -> ``(out, N)``."""
    dims = tn.primal(seq).shape
    if len(dims) != 2:
        raise ShapeError(f"sru_forward expects (d_in, N), got {dims}")
    y = sru_batch(seq.transpose(1, 0)[None], w, shape)
    return y[0].transpose(1, 0)

"""Dense tensor primitives the network blocks are assembled from.

Tensors are plain ``numpy.ndarray`` objects, channel-first and unbatched:
``(C, T, F)`` for audio feature maps, ``(C, T)`` for sequences. Axis roles
are a documentation convention; they are not carried at runtime.

Every primitive also accepts a :class:`Dual` (primal + tangent pair). Linear
primitives push the tangent through themselves with the bias dropped;
nonlinear primitives look up their derivative in :data:`TANGENT_RULES`. This
is what lets :mod:`rtfsnet.numcheck` run the unchanged block code in
forward mode.
"""

from __future__ import annotations

import contextlib
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import NumericalError, ShapeError

EPS = 1e-5

# reductions longer than this accumulate in float64
_WIDE_REDUCTION = 4096


# --------------------------------------------------------------------------
# forward-mode pair
# --------------------------------------------------------------------------


class Dual:
    """A primal tensor travelling together with a tangent of the same shape."""

    __slots__ = ("primal", "tangent")
    __array_ufunc__ = None  # make ndarray <op> Dual defer to the reflected method

    def __init__(self, primal, tangent):
        primal = np.asarray(primal)
        tangent = np.asarray(tangent)
        if primal.shape != tangent.shape:
            tangent = np.broadcast_to(tangent, primal.shape)
        self.primal = primal
        self.tangent = tangent

    def __repr__(self):
        return f"Dual(shape={self.shape}, dtype={self.dtype})"

    @property
    def shape(self):
        return self.primal.shape

    @property
    def ndim(self):
        return self.primal.ndim

    @property
    def dtype(self):
        return self.primal.dtype

    @property
    def size(self):
        return self.primal.size

    def __getitem__(self, idx):
        return Dual(self.primal[idx], self.tangent[idx])

    def reshape(self, *shape):
        return Dual(self.primal.reshape(*shape), self.tangent.reshape(*shape))

    def transpose(self, *axes):
        return Dual(self.primal.transpose(*axes), self.tangent.transpose(*axes))

    def sum(self, axis=None, keepdims=False):
        return Dual(self.primal.sum(axis=axis, keepdims=keepdims),
                    self.tangent.sum(axis=axis, keepdims=keepdims))

    def mean(self, axis=None, keepdims=False):
        return Dual(self.primal.mean(axis=axis, keepdims=keepdims),
                    self.tangent.mean(axis=axis, keepdims=keepdims))

    def __neg__(self):
        return Dual(-self.primal, -self.tangent)

    def __add__(self, other):
        if isinstance(other, Dual):
            p = self.primal + other.primal
            return Dual(p, _bcast(self.tangent, p.shape) + _bcast(other.tangent, p.shape))
        p = self.primal + other
        return Dual(p, _bcast(self.tangent, p.shape))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.primal * other.primal,
                        self.tangent * other.primal + self.primal * other.tangent)
        p = self.primal * other
        return Dual(p, _bcast(self.tangent * other, p.shape))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            raise TypeError("division by a Dual is not supported")
        return Dual(self.primal / other, self.tangent / other)


def _bcast(t, shape):
    return t if t.shape == shape else np.broadcast_to(t, shape)


def is_dual(x) -> bool:
    return isinstance(x, Dual)


def primal(x):
    """The plain array behind ``x`` (identity for arrays)."""
    return x.primal if isinstance(x, Dual) else x


def _lift(fn, x, *args, **kwargs):
    """Apply a linear, bias-free map to both halves of a Dual."""
    return Dual(fn(x.primal, *args, **kwargs), fn(x.tangent, *args, **kwargs))


def concat(xs: Sequence, axis: int = 0):
    if any(isinstance(x, Dual) for x in xs):
        duals = [x if isinstance(x, Dual) else Dual(x, np.zeros_like(x)) for x in xs]
        return Dual(np.concatenate([d.primal for d in duals], axis=axis),
                    np.concatenate([d.tangent for d in duals], axis=axis))
    return np.concatenate(xs, axis=axis)


def stack(xs: Sequence, axis: int = 0):
    if any(isinstance(x, Dual) for x in xs):
        duals = [x if isinstance(x, Dual) else Dual(x, np.zeros_like(x)) for x in xs]
        return Dual(np.stack([d.primal for d in duals], axis=axis),
                    np.stack([d.tangent for d in duals], axis=axis))
    return np.stack(xs, axis=axis)


def moveaxis(x, source, destination):
    if isinstance(x, Dual):
        return _lift(np.moveaxis, x, source, destination)
    return np.moveaxis(x, source, destination)


def flip(x, axis):
    if isinstance(x, Dual):
        return _lift(np.flip, x, axis)
    return np.flip(x, axis)


def matmul(a, b):
    """Matrix product where either operand may carry a tangent."""
    if isinstance(a, Dual) and isinstance(b, Dual):
        return Dual(a.primal @ b.primal, a.tangent @ b.primal + a.primal @ b.tangent)
    if isinstance(a, Dual):
        return Dual(a.primal @ b, a.tangent @ b)
    if isinstance(b, Dual):
        return Dual(a @ b.primal, a @ b.tangent)
    return a @ b


def check_finite(x, where: str):
    arr = primal(x)
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"non-finite values produced by {where}")
    return x


# --------------------------------------------------------------------------
# tangent rules for the nonlinear primitives
# --------------------------------------------------------------------------


def _relu_tangent(x, y, dx):
    return dx * (x >= 0)


def _prelu_tangent(x, y, dx, slope):
    return dx * np.where(x >= 0, 1.0, slope).astype(dx.dtype, copy=False)


def _sigmoid_tangent(x, y, dx):
    return dx * y * (1.0 - y)


def _tanh_tangent(x, y, dx):
    return dx * (1.0 - y * y)


def _softmax_tangent(x, y, dx, axis):
    return y * (dx - (y * dx).sum(axis=axis, keepdims=True))


def _normalize_tangent(x, y, dx, axes, std):
    # y is the standardized input (x - mean) / std
    dmean = dx.mean(axis=axes, keepdims=True)
    proj = (y * dx).mean(axis=axes, keepdims=True)
    return (dx - dmean - y * proj) / std


TANGENT_RULES = {
    "relu": _relu_tangent,
    "prelu": _prelu_tangent,
    "sigmoid": _sigmoid_tangent,
    "tanh": _tanh_tangent,
    "softmax": _softmax_tangent,
    "normalize": _normalize_tangent,
}

_kink_log: list | None = None


@contextlib.contextmanager
def watch_kinks():
    """Record how close ReLU/PReLU inputs come to the kink, relative to the tangent.

    Yields a list that receives, for each kink-bearing primitive evaluated on a
    Dual, the smallest ``|x| / |dx|`` over its elements. A central difference
    with step below that ratio never straddles a kink.
    """
    global _kink_log
    prev, _kink_log = _kink_log, []
    try:
        yield _kink_log
    finally:
        _kink_log = prev


def _log_kink(x, dx):
    if _kink_log is None:
        return
    moving = np.abs(dx) > 0
    if np.any(moving):
        _kink_log.append(float(np.min(np.abs(x[moving]) / np.abs(dx[moving]))))


# --------------------------------------------------------------------------
# activations
# --------------------------------------------------------------------------


def relu(x):
    if isinstance(x, Dual):
        y = np.maximum(x.primal, 0)
        _log_kink(x.primal, x.tangent)
        return Dual(y, TANGENT_RULES["relu"](x.primal, y, x.tangent))
    return np.maximum(x, 0)


def prelu(x, slope):
    """Leaky rectifier with a learned slope per channel (axis 0) or a scalar."""
    slope = np.asarray(slope)
    if slope.ndim == 1 and slope.size > 1:
        if slope.shape[0] != primal(x).shape[0]:
            raise ShapeError(f"prelu slope has {slope.shape[0]} entries, input has "
                             f"{primal(x).shape[0]} channels")
        slope = slope.reshape((-1,) + (1,) * (primal(x).ndim - 1))
    if isinstance(x, Dual):
        y = np.where(x.primal >= 0, x.primal, slope * x.primal).astype(x.dtype, copy=False)
        _log_kink(x.primal, x.tangent)
        return Dual(y, TANGENT_RULES["prelu"](x.primal, y, x.tangent, slope))
    return np.where(x >= 0, x, slope * x).astype(x.dtype, copy=False)


def sigmoid(x):
    if isinstance(x, Dual):
        y = sigmoid(x.primal)
        return Dual(y, TANGENT_RULES["sigmoid"](x.primal, y, x.tangent))
    return (0.5 * (1.0 + np.tanh(0.5 * x))).astype(x.dtype, copy=False)


def tanh(x):
    if isinstance(x, Dual):
        y = np.tanh(x.primal)
        return Dual(y, TANGENT_RULES["tanh"](x.primal, y, x.tangent))
    return np.tanh(x)


def softmax(x, axis: int = -1):
    if isinstance(x, Dual):
        y = softmax(x.primal, axis)
        return Dual(y, TANGENT_RULES["softmax"](x.primal, y, x.tangent, axis))
    z = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


# --------------------------------------------------------------------------
# normalization
# --------------------------------------------------------------------------


def _standardize(x, axes, eps):
    """(x - mean) / sqrt(var + eps) over ``axes``; returns (y, std)."""
    wide = np.prod([x.shape[a] for a in axes]) > _WIDE_REDUCTION
    xa = x.astype(np.float64) if wide and x.dtype != np.float64 else x
    mean = xa.mean(axis=axes, keepdims=True)
    var = ((xa - mean) ** 2).mean(axis=axes, keepdims=True)
    std = np.sqrt(var + eps)
    y = ((xa - mean) / std).astype(x.dtype, copy=False)
    return y, std.astype(x.dtype, copy=False)


def normalize(x, axes: tuple, eps: float = EPS):
    """Zero-mean, unit-variance standardization over ``axes`` (no affine)."""
    axes = tuple(a % primal(x).ndim for a in axes)
    if isinstance(x, Dual):
        y, std = _standardize(x.primal, axes, eps)
        return Dual(y, TANGENT_RULES["normalize"](x.primal, y, x.tangent, axes, std))
    y, _ = _standardize(x, axes, eps)
    return y


def _channel_affine(y, gamma, beta):
    shape = (-1,) + (1,) * (primal(y).ndim - 1)
    return y * np.asarray(gamma).reshape(shape) + np.asarray(beta).reshape(shape)


def _check_channels(x, gamma, name):
    if np.asarray(gamma).shape[0] != primal(x).shape[0]:
        raise ShapeError(f"{name}: {np.asarray(gamma).shape[0]} affine entries for "
                         f"{primal(x).shape[0]} channels")


def global_layer_norm(x, gamma, beta, eps: float = EPS):
    """gLN: statistics over every axis jointly, affine per channel."""
    _check_channels(x, gamma, "gLN")
    y = normalize(x, tuple(range(primal(x).ndim)), eps)
    return check_finite(_channel_affine(y, gamma, beta), "gLN")


def channel_layer_norm(x, gamma, beta, eps: float = EPS):
    """Normalize across channels independently at every other position."""
    _check_channels(x, gamma, "channelLN")
    y = normalize(x, (0,), eps)
    return check_finite(_channel_affine(y, gamma, beta), "channelLN")


def frame_layer_norm(x, gamma, beta, eps: float = EPS):
    """Per time frame, normalize over (channel, frequency) of a ``(C, T, F)`` map.

    ``gamma`` and ``beta`` have shape ``(C, F)``.
    """
    gamma = np.asarray(gamma)
    c, _, f = primal(x).shape
    if gamma.shape != (c, f):
        raise ShapeError(f"frame LN affine shape {gamma.shape} != {(c, f)}")
    y = normalize(x, (0, 2), eps)
    return check_finite(y * gamma[:, None, :] + np.asarray(beta)[:, None, :], "frameLN")


def batch_norm(x, gamma, beta, running_mean, running_var, eps: float = EPS):
    """Inference-mode batch norm: a fixed per-channel affine map."""
    _check_channels(x, gamma, "batch_norm")
    scale = np.asarray(gamma) / np.sqrt(np.asarray(running_var) + eps)
    shift = np.asarray(beta) - np.asarray(running_mean) * scale
    return _channel_affine(x, scale.astype(primal(x).dtype), shift.astype(primal(x).dtype))


# --------------------------------------------------------------------------
# convolution
# --------------------------------------------------------------------------


def _pair(v):
    return (v, v) if isinstance(v, (int, np.integer)) else tuple(v)


def _pad_pairs(padding, nd):
    """Normalize padding into ``nd`` (before, after) pairs."""
    if isinstance(padding, (int, np.integer)):
        return [(int(padding), int(padding))] * nd
    out = []
    for p in padding:
        out.append((int(p), int(p)) if isinstance(p, (int, np.integer)) else (int(p[0]), int(p[1])))
    if len(out) != nd:
        raise ShapeError(f"padding {padding!r} does not cover {nd} axes")
    return out


def same_padding(kernel: int):
    """(before, after) zero padding that keeps length under a stride-1 conv."""
    before = (kernel - 1) // 2
    return (before, kernel - 1 - before)


def conv2d(x, weight, bias=None, stride=1, padding=0, groups: int = 1):
    """Cross-correlation of a ``(C, H, W)`` map with ``weight`` ``(C_out, C/groups, kh, kw)``.

    ``padding`` is an int, a per-axis int pair, or per-axis (before, after) pairs.
    """
    if isinstance(x, Dual):
        return Dual(conv2d(x.primal, weight, bias, stride, padding, groups),
                    conv2d(x.tangent, weight, None, stride, padding, groups))
    if x.ndim != 3:
        raise ShapeError(f"conv2d expects (C, H, W), got {x.shape}")
    c_in, h, w = x.shape
    c_out, cin_g, kh, kw = weight.shape
    if groups < 1 or c_in % groups or c_out % groups or c_in // groups != cin_g:
        raise ShapeError(f"conv2d: input channels {c_in}, weight {weight.shape}, groups {groups}")
    sh, sw = _pair(stride)
    (pt, pb), (pl, pr) = _pad_pairs(padding, 2)
    if min(pt, pb, pl, pr) < 0 or sh < 1 or sw < 1:
        raise ShapeError("conv2d: negative padding or non-positive stride")
    ho = (h + pt + pb - kh) // sh + 1
    wo = (w + pl + pr - kw) // sw + 1
    if ho <= 0 or wo <= 0:
        raise ShapeError(f"conv2d: zero-size output for input {x.shape} and kernel {(kh, kw)}")
    xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr))) if pt or pb or pl or pr else x
    cout_g = c_out // groups
    acc = np.float64 if cin_g * kh * kw > _WIDE_REDUCTION else x.dtype
    depthwise = cin_g == 1 and cout_g == 1
    if not depthwise:
        wg = weight.reshape(groups, cout_g, cin_g, kh, kw).astype(acc, copy=False)
    out = np.zeros((c_out, ho, wo), dtype=acc)
    for i in range(kh):
        for j in range(kw):
            xs = xp[:, i:i + sh * (ho - 1) + 1:sh, j:j + sw * (wo - 1) + 1:sw]
            if depthwise:
                out += weight[:, 0, i, j].astype(acc)[:, None, None] * xs
            else:
                xs = xs.reshape(groups, cin_g, ho * wo).astype(acc, copy=False)
                out += np.matmul(wg[:, :, :, i, j], xs).reshape(c_out, ho, wo)
    out = out.astype(x.dtype, copy=False)
    if bias is not None:
        out += np.asarray(bias, dtype=x.dtype)[:, None, None]
    return check_finite(out, "conv2d")


def conv_transpose2d(x, weight, bias=None, stride=1, padding=0, groups: int = 1):
    """Adjoint of :func:`conv2d`; ``weight`` is ``(C_in, C_out/groups, kh, kw)``.

    Output size per axis is ``(n - 1) * stride - before - after + k``.
    """
    if isinstance(x, Dual):
        return Dual(conv_transpose2d(x.primal, weight, bias, stride, padding, groups),
                    conv_transpose2d(x.tangent, weight, None, stride, padding, groups))
    if x.ndim != 3:
        raise ShapeError(f"conv_transpose2d expects (C, H, W), got {x.shape}")
    c_in, h, w = x.shape
    wc_in, cout_g, kh, kw = weight.shape
    if groups < 1 or wc_in != c_in or c_in % groups:
        raise ShapeError(f"conv_transpose2d: input channels {c_in}, weight {weight.shape}, "
                         f"groups {groups}")
    sh, sw = _pair(stride)
    (pt, pb), (pl, pr) = _pad_pairs(padding, 2)
    hf = (h - 1) * sh + kh
    wf = (w - 1) * sw + kw
    if hf - pt - pb <= 0 or wf - pl - pr <= 0:
        raise ShapeError("conv_transpose2d: zero-size output")
    cin_g = c_in // groups
    c_out = cout_g * groups
    acc = np.float64 if cin_g * kh * kw > _WIDE_REDUCTION else x.dtype
    # per tap: (groups, cout_g, cin_g) @ (groups, cin_g, h*w)
    wg = weight.reshape(groups, cin_g, cout_g, kh, kw).transpose(0, 2, 1, 3, 4).astype(acc, copy=False)
    xs = x.reshape(groups, cin_g, h * w).astype(acc, copy=False)
    full = np.zeros((c_out, hf, wf), dtype=acc)
    for i in range(kh):
        for j in range(kw):
            contrib = np.matmul(wg[:, :, :, i, j], xs).reshape(c_out, h, w)
            full[:, i:i + sh * (h - 1) + 1:sh, j:j + sw * (w - 1) + 1:sw] += contrib
    out = full[:, pt:hf - pb, pl:wf - pr].astype(x.dtype)
    if bias is not None:
        out += np.asarray(bias, dtype=x.dtype)[:, None, None]
    return check_finite(out, "conv_transpose2d")


def _pad1d(padding):
    if isinstance(padding, (int, np.integer)):
        return ((0, 0), (int(padding), int(padding)))
    return ((0, 0), tuple(int(p) for p in padding))


def conv1d(x, weight, bias=None, stride: int = 1, padding=0, groups: int = 1):
    """1D cross-correlation of ``(C, T)`` with ``weight`` ``(C_out, C/groups, k)``."""
    if primal(x).ndim != 2:
        raise ShapeError(f"conv1d expects (C, T), got {primal(x).shape}")
    y = conv2d(x[:, None, :], weight[:, :, None, :], bias, (1, stride), _pad1d(padding), groups)
    return y[:, 0, :]


def conv_transpose1d(x, weight, bias=None, stride: int = 1, padding=0, groups: int = 1):
    if primal(x).ndim != 2:
        raise ShapeError(f"conv_transpose1d expects (C, T), got {primal(x).shape}")
    y = conv_transpose2d(x[:, None, :], weight[:, :, None, :], bias, (1, stride),
                         _pad1d(padding), groups)
    return y[:, 0, :]


def linear(x, weight, bias=None):
    """``x @ weight.T + bias`` over the last axis."""
    y = matmul(x, np.asarray(weight).T)
    if bias is not None:
        y = y + np.asarray(bias)
    return y


# --------------------------------------------------------------------------
# resampling and reshaping
# --------------------------------------------------------------------------


def nearest_indices(n_in: int, n_out: int) -> np.ndarray:
    if n_out <= 0 or n_in <= 0:
        raise ShapeError(f"interpolation between lengths {n_in} and {n_out}")
    return (np.arange(n_out, dtype=np.int64) * n_in) // n_out


def interp_nearest(x, size):
    """Nearest-neighbour resize of the trailing axes; ``out[i] = in[floor(i*N/M)]``.

    ``size`` is an int (last axis) or a tuple covering the last ``len(size)`` axes.
    """
    size = (size,) if isinstance(size, (int, np.integer)) else tuple(size)
    shape = primal(x).shape
    nd = len(shape)
    y = x
    for k, m in enumerate(size):
        axis = nd - len(size) + k
        n = shape[axis]
        if m == n:
            continue
        idx = nearest_indices(n, m)
        sl = [slice(None)] * nd
        sl[axis] = idx
        y = y[tuple(sl)]
    return y


def _pool_matrix(n_in: int, n_out: int, dtype) -> np.ndarray:
    if n_out <= 0 or n_out > n_in:
        raise ShapeError(f"adaptive pooling from {n_in} to {n_out}")
    p = np.zeros((n_out, n_in), dtype=np.float64)
    for i in range(n_out):
        lo = (i * n_in) // n_out
        hi = -((-(i + 1) * n_in) // n_out)
        p[i, lo:hi] = 1.0 / (hi - lo)
    return p.astype(dtype)


def adaptive_avg_pool(x, size):
    """Adaptive average pooling of the trailing axes.

    Bin ``i`` averages input ``[floor(i*In/Out), ceil((i+1)*In/Out))``.
    """
    size = (size,) if isinstance(size, (int, np.integer)) else tuple(size)
    shape = primal(x).shape
    nd = len(shape)
    y = x
    for k, m in enumerate(size):
        axis = nd - len(size) + k
        n = shape[axis]
        if m == n:
            continue
        p = _pool_matrix(n, m, primal(x).dtype)
        y = moveaxis(matmul(p, moveaxis(y, axis, -2)), -2, axis)
    return y


def unfold_pad(length: int, kernel: int, stride: int) -> int:
    """Right zero-padding that makes the last window land exactly on the end."""
    return (stride - (length - kernel) % stride) % stride


def unfold_freq(x, kernel: int, stride: int = 1):
    """Sliding windows along the last axis of ``(C, T, F)`` folded into channels.

    Output is ``(C*kernel, T, F')``; channel ``c*kernel + j`` of window ``w``
    holds ``x[c, :, w*stride + j]`` (after right zero-padding).
    """
    if isinstance(x, Dual):
        return _lift(unfold_freq, x, kernel, stride)
    c, t, f = x.shape
    if kernel < 1 or stride < 1:
        raise ShapeError("unfold kernel and stride must be positive")
    pad = unfold_pad(f, kernel, stride)
    if kernel > f + pad:
        raise ShapeError(f"unfold kernel {kernel} exceeds frequency length {f}")
    xp = np.pad(x, ((0, 0), (0, 0), (0, pad))) if pad else x
    win = sliding_window_view(xp, kernel, axis=2)[:, :, ::stride, :]  # (C, T, F', k)
    fo = win.shape[2]
    return np.ascontiguousarray(win.transpose(0, 3, 1, 2)).reshape(c * kernel, t, fo)

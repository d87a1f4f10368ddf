"""Waveform <-> time-frequency boundary: STFT/iSTFT plus the audio encoder and decoder."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as tn
from .errors import ShapeError
from .tensor import Dual


@dataclass
class ComplexSpectrogram:
    """One-sided STFT stored as paired real/imaginary ``(T, F)`` planes."""

    real: np.ndarray
    imag: np.ndarray
    window: int = 256
    hop: int = 128

    def __post_init__(self):
        if tn.primal(self.real).shape != tn.primal(self.imag).shape:
            raise ShapeError("real and imaginary planes differ in shape")
        if tn.primal(self.real).shape[1] != self.window // 2 + 1:
            raise ShapeError(f"expected {self.window // 2 + 1} frequency bins, "
                             f"got {tn.primal(self.real).shape[1]}")

    @property
    def frames(self) -> int:
        return tn.primal(self.real).shape[0]

    @property
    def bins(self) -> int:
        return tn.primal(self.real).shape[1]


def hann(window: int) -> np.ndarray:
    """Periodic Hann window (sums to a constant at 50% overlap)."""
    n = np.arange(window)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / window)


def num_frames(length: int, hop: int) -> int:
    return length // hop + 1


def _frames(x: np.ndarray, window: int, hop: int) -> np.ndarray:
    half = window // 2
    if x.size > 1:
        xp = np.pad(x, (half, half), mode="reflect")
    else:
        xp = np.pad(x, (half, half), mode="edge")
    n = num_frames(x.size, hop)
    idx = np.arange(window)[None, :] + hop * np.arange(n)[:, None]
    return xp[idx]


def _stft_array(x: np.ndarray, window: int, hop: int):
    out_dtype = np.float64 if x.dtype == np.float64 else np.float32
    spec = np.fft.rfft(_frames(x.astype(np.float64), window, hop) * hann(window), axis=1)
    return spec.real.astype(out_dtype), spec.imag.astype(out_dtype)


def stft(x, window: int = 256, hop: int = 128) -> ComplexSpectrogram:
    """Centred (reflect-padded), Hann-windowed, unnormalized one-sided STFT.

    Produces ``floor(L / hop) + 1`` frames of ``window // 2 + 1`` bins.
    """
    if tn.primal(x).ndim != 1 or tn.primal(x).size < 1:
        raise ShapeError("stft needs a non-empty 1D waveform")
    if isinstance(x, Dual):
        # reflect padding and the DFT are both linear
        pr, pi = _stft_array(x.primal, window, hop)
        tr, ti = _stft_array(x.tangent, window, hop)
        return ComplexSpectrogram(Dual(pr, tr), Dual(pi, ti), window, hop)
    re, im = _stft_array(np.asarray(x), window, hop)
    return ComplexSpectrogram(re, im, window, hop)


def max_length(frames: int, window: int, hop: int) -> int:
    """Longest waveform an ``frames``-frame spectrogram can be inverted to."""
    return (frames - 1) * hop + window // 2


def _istft_array(re: np.ndarray, im: np.ndarray, window: int, hop: int, length: int):
    n = re.shape[0]
    w = hann(window)
    frames = np.fft.irfft(re.astype(np.float64) + 1j * im.astype(np.float64), n=window, axis=1) * w
    total = (n - 1) * hop + window
    y = np.zeros(total)
    wsum = np.zeros(total)
    for t in range(n):
        y[t * hop:t * hop + window] += frames[t]
        wsum[t * hop:t * hop + window] += w * w
    nz = wsum > 1e-11
    y[nz] /= wsum[nz]
    half = window // 2
    out = y[half:half + length]
    if out.size < length:
        out = np.pad(out, (0, length - out.size))
    return out.astype(np.float64 if re.dtype == np.float64 else np.float32)


def istft(spec: ComplexSpectrogram, length: int):
    """Weighted overlap-add inverse of :func:`stft`, trimmed to ``length`` samples."""
    if length < 1:
        raise ShapeError("istft output length must be positive")
    limit = max_length(spec.frames, spec.window, spec.hop)
    if length > limit:
        raise ShapeError(f"{spec.frames} frames can reconstruct at most {limit} samples, "
                         f"{length} requested")
    if isinstance(spec.real, Dual) or isinstance(spec.imag, Dual):
        re = spec.real if isinstance(spec.real, Dual) else Dual(spec.real, np.zeros_like(spec.real))
        im = spec.imag if isinstance(spec.imag, Dual) else Dual(spec.imag, np.zeros_like(spec.imag))
        return Dual(_istft_array(re.primal, im.primal, spec.window, spec.hop, length),
                    _istft_array(re.tangent, im.tangent, spec.window, spec.hop, length))
    return _istft_array(spec.real, spec.imag, spec.window, spec.hop, length)


def encode_audio(spec: ComplexSpectrogram, weight, bias=None):
    """Stack Re/Im as two channels, then a shape-preserving 3x3 conv to ``C_a`` channels.

    Returns a ``(C_a, T, F)`` feature map.
    """
    if np.asarray(weight).shape[1:] != (2, 3, 3):
        raise ShapeError(f"encoder weight must be (C_a, 2, 3, 3), got {np.asarray(weight).shape}")
    x = tn.stack([spec.real, spec.imag], axis=0)
    return tn.conv2d(x, weight, bias, stride=1, padding=1)


def decode_audio(z, weight, bias, length: int, window: int = 256, hop: int = 128):
    """Transposed 3x3 conv to two channels (real, imaginary) followed by iSTFT."""
    if np.asarray(weight).shape[1:] != (2, 3, 3):
        raise ShapeError(f"decoder weight must be (C_a, 2, 3, 3), got {np.asarray(weight).shape}")
    ri = tn.conv_transpose2d(z, weight, bias, stride=1, padding=1)
    return istft(ComplexSpectrogram(ri[0], ri[1], window, hop), length)

"""Mono 16 kHz WAV reading and writing (PCM16 or IEEE float32)."""

from __future__ import annotations

import warnings

import numpy as np
from scipy.io import wavfile

from .errors import FormatError

SAMPLE_RATE = 16000


def read_wav(path, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Read a mono WAV as float32 samples in [-1, 1).

    Anything other than mono PCM16/float32 at ``sample_rate`` is rejected; no
    resampling or down-mixing is attempted.
    """
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except (ValueError, OSError, EOFError) as exc:
        raise FormatError(f"cannot read WAV: {exc}", path=path) from exc
    if rate != sample_rate:
        raise FormatError(f"sample rate {rate} Hz is not supported, expected {sample_rate} Hz",
                          path=path)
    if data.ndim != 1:
        raise FormatError(f"{data.shape[1]} channels found, only mono is supported", path=path)
    if data.dtype == np.int16:
        samples = data.astype(np.float32) / 32768.0
    elif data.dtype == np.float32:
        samples = data.copy()
    else:
        raise FormatError(f"sample format {data.dtype} is not supported (PCM16 or float32 only)",
                          path=path)
    if samples.size == 0:
        raise FormatError("WAV contains no samples", path=path)
    if not np.all(np.isfinite(samples)):
        raise FormatError("WAV contains non-finite samples", path=path)
    return samples


def write_wav(path, samples, sample_rate: int = SAMPLE_RATE, fmt: str = "float32") -> None:
    """Write mono samples as ``float32`` or clipped ``pcm16``."""
    x = np.asarray(samples)
    if x.ndim != 1:
        raise FormatError("only mono waveforms can be written", path=path)
    if fmt == "float32":
        data = x.astype(np.float32)
    elif fmt == "pcm16":
        data = np.clip(np.round(x * 32768.0), -32768, 32767).astype(np.int16)
    else:
        raise FormatError(f"unknown WAV sample format {fmt!r}", path=path)
    try:
        wavfile.write(path, sample_rate, data)
    except OSError as exc:
        raise FormatError(f"cannot write WAV: {exc}", path=path) from exc

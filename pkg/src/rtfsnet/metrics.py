"""Separation quality in decibels: SI-SNR, SDR and their improvements over the mixture."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ShapeError

CAP_DB = 120.0
# error energy below this fraction of the signal energy counts as perfect
_PERFECT = 1e-12


def _pair(s, sh):
    s = np.asarray(s, dtype=np.float64).ravel()
    sh = np.asarray(sh, dtype=np.float64).ravel()
    if s.shape != sh.shape:
        raise ShapeError(f"length mismatch: reference {s.size}, estimate {sh.size}")
    if not np.any(s):
        raise ValueError("reference signal is all zeros")
    return s, sh


def _ratio_db(signal: float, error: float) -> tuple[float, bool]:
    if error <= _PERFECT * signal:
        return CAP_DB, True
    return min(CAP_DB, 10.0 * np.log10(signal / error)), False


def si_snr_detail(s, sh) -> tuple[float, bool]:
    """SI-SNR in dB and whether it hit the cap.

    The reference is projected onto without removing means: ``w = <sh,s>/<s,s>``.
    """
    s, sh = _pair(s, sh)
    target = (sh @ s) / (s @ s) * s
    noise = sh - target
    return _ratio_db(float(target @ target), float(noise @ noise))


def si_snr(s, sh) -> float:
    return si_snr_detail(s, sh)[0]


def sdr_detail(s, sh) -> tuple[float, bool]:
    s, sh = _pair(s, sh)
    err = s - sh
    return _ratio_db(float(s @ s), float(err @ err))


def sdr(s, sh) -> float:
    """Plain signal-to-error ratio ``||s||^2 / ||s - sh||^2`` in dB (not scale invariant)."""
    return sdr_detail(s, sh)[0]


@dataclass(frozen=True)
class MetricResult:
    si_snr: float
    si_snri: float
    sdr: float
    sdri: float
    capped: bool

    def to_dict(self) -> dict:
        return asdict(self)


def improvements(x, s, sh) -> MetricResult:
    """Metrics of estimate ``sh`` and their gain over using the mixture ``x`` as estimate."""
    est_si, cap1 = si_snr_detail(s, sh)
    mix_si, cap2 = si_snr_detail(s, x)
    est_sdr, cap3 = sdr_detail(s, sh)
    mix_sdr, cap4 = sdr_detail(s, x)
    return MetricResult(est_si, est_si - mix_si, est_sdr, est_sdr - mix_sdr,
                        cap1 or cap2 or cap3 or cap4)

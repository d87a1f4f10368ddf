"""Built-in invariant checks run by ``rtfsnet selftest``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model, numcheck
from .config import ModelConfig
from .s3 import s3_apply
from .stft import istft, stft


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def check_stft_roundtrip(cfg: ModelConfig, rng, count: int = 5) -> CheckResult:
    worst = 0.0
    for _ in range(count):
        x = rng.standard_normal(cfg.sample_rate)
        y = istft(stft(x, cfg.window, cfg.hop), x.size)
        worst = max(worst, float(np.sqrt(np.mean((x - y) ** 2))))
    return CheckResult("stft_roundtrip", worst < 1e-6, f"max rms error {worst:.2e}")


def complex_oracle(mask, feat):
    """Per-bin complex product, one Python scalar at a time."""
    half = mask.shape[0] // 2
    out = np.empty_like(mask)
    for c in range(half):
        for t in range(mask.shape[1]):
            for f in range(mask.shape[2]):
                z = complex(mask[c, t, f], mask[c + half, t, f]) * complex(
                    feat[c, t, f], feat[c + half, t, f])
                out[c, t, f], out[c + half, t, f] = z.real, z.imag
    return out


def check_s3_oracle(rng) -> CheckResult:
    m = rng.standard_normal((8, 5, 7))
    e = rng.standard_normal((8, 5, 7))
    err = float(np.max(np.abs(s3_apply(m, e) - complex_oracle(m, e))))
    return CheckResult("s3_oracle", err <= 1e-6, f"max abs error {err:.2e}")


def check_forward(graph: model.ModelGraph, rng, num_samples: int) -> list[CheckResult]:
    x, v0 = numcheck.probe_inputs(graph, int(rng.integers(2**31)), num_samples)
    x, v0 = x.astype(np.float32), v0.astype(np.float32)
    y1 = model.forward(graph, x, v0)
    y2 = model.forward(graph, x, v0)
    return [
        CheckResult("output_length", y1.shape == x.shape, f"{y1.shape[0]} of {x.shape[0]} samples"),
        CheckResult("determinism", bool(np.array_equal(y1, y2)), "two runs bit-identical"
                    if np.array_equal(y1, y2) else "runs differ"),
    ]


def run_selftest(cfg: ModelConfig, seed: int = 0, audit: bool = True,
                 num_samples: int = 8000) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results = [check_stft_roundtrip(cfg, rng), check_s3_oracle(rng)]
    graph = model.build(cfg, seed=seed)
    results += check_forward(graph, rng, num_samples)
    if audit:
        report = numcheck.smoothness_audit(graph, seed, num_samples)
        for r in report.results:
            results.append(CheckResult(f"smoothness[{r.block}]", r.passed,
                                       f"relative error {r.rel_error:.1e}"))
    return results

"""Forward-mode derivatives checked against central finite differences.

Every block runs unchanged on :class:`~rtfsnet.tensor.Dual` inputs, so a
directional derivative costs one extra pass. The audit compares it with
``(f(x + e d) - f(x - e d)) / 2e`` block by block and end to end.

Rectifiers make the network only piecewise smooth. While the forward-mode
pass runs, every ReLU/PReLU reports how far its input sits from the kink in
units of the tangent; the finite-difference step is shrunk until the stencil
stays on one side of every kink, and the probe is redrawn when even the
smallest allowed step would straddle one.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import caf, rtfs, s3, vp
from . import tensor as tn
from .model import ModelGraph, forward
from .stft import decode_audio, encode_audio, stft

TOLERANCE = 1e-2
STEP = 1e-3
MIN_STEP = 1e-8
MAX_REDRAWS = 5
BLOCKS = ("encoder", "vp", "caf", "rtfs", "mask", "decoder", "end_to_end")


def _as_tuple(x):
    return tuple(x) if isinstance(x, (tuple, list)) else (x,)


def jvp(f: Callable, x, d):
    """Return ``(f(x), J_f(x) d)``; ``x`` and ``d`` may be tuples of matching arrays."""
    xs, ds = _as_tuple(x), _as_tuple(d)
    if len(xs) != len(ds):
        raise ValueError("need one direction per input")
    duals = [tn.Dual(np.asarray(a), np.asarray(b, dtype=np.asarray(a).dtype))
             for a, b in zip(xs, ds)]
    out = f(*duals)
    if isinstance(out, tn.Dual):
        return out.primal, np.asarray(out.tangent)
    out = np.asarray(out)
    return out, np.zeros_like(out)


def central_difference(f: Callable, x, d, step: float):
    xs, ds = _as_tuple(x), _as_tuple(d)
    plus = f(*[a + step * b for a, b in zip(xs, ds)])
    minus = f(*[a - step * b for a, b in zip(xs, ds)])
    return (np.asarray(plus, dtype=np.float64) - np.asarray(minus, dtype=np.float64)) / (2 * step)


def relative_error(fd, tangent) -> float:
    fd = np.asarray(fd, dtype=np.float64)
    tangent = np.asarray(tangent, dtype=np.float64)
    return float(np.linalg.norm(fd - tangent) / (np.linalg.norm(tangent) + 1e-8))


@dataclass
class ProbeResult:
    block: str
    rel_error: float
    step: float
    redraws: int
    kink_margin: float
    passed: bool


@dataclass
class AuditReport:
    seed: int
    tolerance: float
    results: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def max_error(self) -> dict:
        return {r.block: r.rel_error for r in self.results}

    def to_dict(self) -> dict:
        return {"seed": self.seed, "tolerance": self.tolerance, "passed": self.passed,
                "results": [asdict(r) for r in self.results]}

    def lines(self) -> list[str]:
        return [f"{'PASS' if r.passed else 'FAIL'} {r.block:<11} rel_err={r.rel_error:.2e} "
                f"step={r.step:.0e} redraws={r.redraws}" for r in self.results]


def check_direction(f: Callable, x, rng: np.random.Generator, tolerance: float = TOLERANCE,
                    block: str = "f") -> ProbeResult:
    """Probe ``f`` at ``x`` along random directions scaled to each input's RMS."""
    xs = _as_tuple(x)
    for redraw in range(MAX_REDRAWS + 1):
        ds = tuple(rng.standard_normal(a.shape) * max(float(np.sqrt(np.mean(a * a))), 1e-3)
                   for a in xs)
        with tn.watch_kinks() as log:
            _, tangent = jvp(f, xs, ds)
        margin = min(log) if log else np.inf
        step = STEP
        while step > margin and step / 10 >= MIN_STEP:
            step /= 10
        if step <= margin:
            fd = central_difference(f, xs, ds, step)
            err = relative_error(fd, tangent)
            return ProbeResult(block, err, step, redraw, float(margin), err < tolerance)
    return ProbeResult(block, float("nan"), step, MAX_REDRAWS, float(margin), False)


def block_probes(graph: ModelGraph, x, v0) -> list[tuple[str, Callable, tuple]]:
    """(name, function, inputs) for every block, with inputs taken from a real forward pass."""
    cfg, w = graph.config, graph.weights
    trace: dict = {}
    forward(graph, x, v0, trace)
    length = x.shape[0]
    return [
        ("encoder", lambda s: encode_audio(stft(s, cfg.window, cfg.hop), w["encoder.weight"],
                                           w["encoder.bias"]), (x,)),
        ("vp", lambda v: vp.vp_forward(v, graph.scope("vp"), cfg), (v0,)),
        ("caf", lambda a, v: caf.caf_forward(a, v, graph.scope("caf"), cfg.fusion_heads),
         (trace["a1"], trace["v1"])),
        ("rtfs", lambda a: rtfs.rtfs_forward(a, graph.scope("rtfs"), cfg), (trace["fused"],)),
        ("mask", lambda a, e: s3.s3_apply(s3.make_mask(a, graph.scope("mask")), e),
         (trace["a_r"], trace["a0"])),
        ("decoder", lambda z: decode_audio(z, w["decoder.weight"], w["decoder.bias"], length,
                                           cfg.window, cfg.hop), (trace["z"],)),
        ("end_to_end", lambda s, v: forward(graph, s, v), (x, v0)),
    ]


def probe_inputs(graph: ModelGraph, seed: int, num_samples: int = 8000):
    """Seeded mixture and visual features sized for ``num_samples`` of audio."""
    from .complexity import visual_frames

    cfg = graph.config
    rng = np.random.default_rng(seed)
    x = 0.1 * rng.standard_normal(num_samples)
    tv = max(visual_frames(num_samples, cfg.sample_rate), 2 ** cfg.vp_depth)
    v0 = rng.standard_normal((cfg.visual_channels, tv))
    return x, v0


def smoothness_audit(graph: ModelGraph, seed: int = 0, num_samples: int = 8000,
                     tolerance: float = TOLERANCE, blocks: Sequence[str] = BLOCKS) -> AuditReport:
    """Compare forward-mode and finite-difference derivatives for every block (in float64)."""
    g64 = graph.astype(np.float64)
    x, v0 = probe_inputs(g64, seed, num_samples)
    rng = np.random.default_rng([seed, 1])
    report = AuditReport(seed, tolerance)
    for name, f, inputs in block_probes(g64, x, v0):
        if name in blocks:
            report.results.append(check_direction(f, inputs, rng, tolerance, name))
    return report

"""Static parameter and multiply-accumulate accounting.

Counts come from closed-form formulas over the config, written independently
of the weight declarations so each can audit the other. MACs cover
weight-bearing operations only (convolutions, linear maps, the SRU input
projections and the two attention matmuls); norms, activations, softmax,
interpolation and the STFT are free. The shared RTFS block is counted once
for parameters and once per application for MACs.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

from .config import ModelConfig

# lip-feature frame rate assumed when sizing the visual stream
VIDEO_FPS = 25
_DW = 4  # depthwise kernel of downsamplers and fusion units
_COLUMNS = ("module", "params", "macs", "applications")


@dataclass(frozen=True)
class CostRow:
    module: str
    params: int
    macs: int
    applications: int = 1


@dataclass
class CostReport:
    rows: list
    num_samples: int
    sample_rate: int
    config: dict = field(default_factory=dict)

    @property
    def total_params(self) -> int:
        return sum(r.params for r in self.rows)

    @property
    def total_macs(self) -> int:
        return sum(r.macs for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "num_samples": self.num_samples,
            "sample_rate": self.sample_rate,
            "config": self.config,
            "rows": [asdict(r) for r in self.rows],
            "total": {"params": self.total_params, "macs": self.total_macs},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CostReport":
        return cls([CostRow(**r) for r in data["rows"]], data["num_samples"],
                   data["sample_rate"], data.get("config", {}))

    @classmethod
    def from_json(cls, text: str) -> "CostReport":
        return cls.from_dict(json.loads(text))


def _config(obj) -> ModelConfig:
    return getattr(obj, "config", obj)


def _down(n: int) -> int:
    return (n + 2 - _DW) // 2 + 1


def _pyramid(n: int, steps: int) -> list[int]:
    sizes = [n]
    for _ in range(steps):
        sizes.append(_down(sizes[-1]))
    return sizes


# --------------------------------------------------------------------------
# parameters
# --------------------------------------------------------------------------


def _sru_params(d_in: int, h: int, layers: int) -> int:
    first = 3 * h * d_in + h * d_in + 4 * h  # input width differs: highway projection
    rest = 3 * h * 2 * h + 4 * h
    return 2 * (first + (layers - 1) * rest)


def _rtfs_params(c: ModelConfig) -> int:
    ca, d, q, h, k = c.audio_channels, c.block_channels, c.compress_depth, c.sru_hidden, c.unfold_kernel
    fbins = _pyramid(c.freq_bins, q - 1)[-1]
    e, dv = c.attn_qk_channels, d // c.attn_heads
    n = d * ca + d
    n += (q - 1) * (_DW * _DW * d + d)
    path = 2 * d * k + _sru_params(d * k, h, c.sru_layers) + 2 * h * d * k + d
    n += 2 * path
    branch = lambda co: co * d + co + co + 2 * co * fbins  # noqa: E731  conv, PReLU, frame LN
    n += c.attn_heads * (2 * branch(e) + branch(dv)) + branch(d)
    n += (2 * q - 1) * 3 * (_DW * _DW * d + 2 * d)
    n += ca * d + ca
    return n


def _vp_params(c: ModelConfig) -> int:
    cv, hd, f, qv = c.visual_channels, c.vp_hidden, c.vp_ffn, c.vp_depth
    n = cv * hd + hd + 2 * hd + hd
    n += qv * (_DW * hd + hd + 2 * hd)
    n += 2 * hd + 4 * (hd * hd + hd)
    n += 2 * hd + (f * hd + f) + (5 * f + f) + (hd * f + hd)
    n += (2 * qv + 1) * 3 * (_DW * hd + 2 * hd)
    n += hd * cv + cv
    return n


def _caf_params(c: ModelConfig) -> int:
    ca, cv, heads = c.audio_channels, c.visual_channels, c.fusion_heads
    return 2 * (ca + 2 * ca) + (heads * cv + 2 * ca * heads) + (cv + 2 * ca)


def param_rows(cfg) -> dict[str, int]:
    c = _config(cfg)
    ca = c.audio_channels
    return {
        "encoder": ca * 2 * 9 + ca,
        "vp": _vp_params(c),
        "caf": _caf_params(c),
        "rtfs": _rtfs_params(c),
        "mask": ca + ca * ca + ca,
        "decoder": ca * 2 * 9 + 2,
    }


# --------------------------------------------------------------------------
# multiply-accumulates
# --------------------------------------------------------------------------


def _sru_macs(d_in: int, h: int, layers: int, steps: int) -> int:
    first = 4 * h * d_in
    rest = 3 * h * 2 * h
    return 2 * steps * (first + (layers - 1) * rest)


def _rtfs_macs(c: ModelConfig, t: int) -> int:
    ca, d, q, h, k, s = (c.audio_channels, c.block_channels, c.compress_depth, c.sru_hidden,
                         c.unfold_kernel, c.unfold_stride)
    ts, fs = _pyramid(t, q - 1), _pyramid(c.freq_bins, q - 1)
    tc, fc = ts[-1], fs[-1]
    m = d * ca * t * fs[0]
    m += sum(_DW * _DW * d * ts[i + 1] * fs[i + 1] for i in range(q - 1))
    for rows, length in ((tc, fc), (fc, tc)):
        windows = -(-(length - k) // s) + 1
        steps = rows * windows
        m += _sru_macs(d * k, h, c.sru_layers, steps)
        m += steps * 2 * h * d * k
    e, dv, cells = c.attn_qk_channels, d // c.attn_heads, tc * fc
    m += c.attn_heads * ((2 * e + dv) * d * cells + tc * tc * (e + dv) * fc)
    m += d * d * cells
    dw = _DW * _DW * d
    m += sum(dw * (ts[i] * fs[i] + 2 * cells) for i in range(q))
    m += sum(dw * (ts[j] * fs[j] + 2 * ts[j + 1] * fs[j + 1]) for j in range(q - 1))
    m += ca * d * t * fs[0]
    return m


def _vp_macs(c: ModelConfig, tv: int) -> int:
    cv, hd, f, qv = c.visual_channels, c.vp_hidden, c.vp_ffn, c.vp_depth
    ts = _pyramid(tv, qv)
    tc = ts[-1]
    m = hd * cv * tv
    m += sum(_DW * hd * n for n in ts[1:])
    m += 4 * hd * hd * tc + 2 * hd * tc * tc
    m += f * hd * tc + 5 * f * tc + hd * f * tc
    m += sum(_DW * hd * (ts[i] + 2 * tc) for i in range(qv + 1))
    m += sum(_DW * hd * (ts[j] + 2 * ts[j + 1]) for j in range(qv))
    m += cv * hd * tv
    return m


def visual_frames(num_samples: int, sample_rate: int) -> int:
    return max(1, round(num_samples * VIDEO_FPS / sample_rate))


def mac_rows(cfg, num_samples: int) -> dict[str, int]:
    c = _config(cfg)
    ca, cv = c.audio_channels, c.visual_channels
    t, f = c.frames(num_samples), c.freq_bins
    tv = visual_frames(num_samples, c.sample_rate)
    cells = t * f
    return {
        "encoder": ca * 2 * 9 * cells,
        "vp": _vp_macs(c, tv),
        "caf": 2 * ca * cells + (c.fusion_heads + 1) * cv * tv,
        "rtfs": c.num_blocks * _rtfs_macs(c, t),
        "mask": ca * ca * cells,
        "decoder": ca * cells * 2 * 9,
    }


def count_params(cfg) -> list[CostRow]:
    return [CostRow(m, p, 0) for m, p in param_rows(cfg).items()]


def count_macs(cfg, num_samples: int) -> list[CostRow]:
    c = _config(cfg)
    return [CostRow(m, 0, v, c.num_blocks if m == "rtfs" else 1)
            for m, v in mac_rows(c, num_samples).items()]


def analyze(cfg, seconds: float = 2.0) -> CostReport:
    c = _config(cfg)
    n = int(round(seconds * c.sample_rate))
    params, macs = param_rows(c), mac_rows(c, n)
    rows = [CostRow(m, params[m], macs[m], c.num_blocks if m == "rtfs" else 1) for m in params]
    return CostReport(rows, n, c.sample_rate, c.to_dict())


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------


def _human(n: int, unit: float, suffix: str) -> str:
    return f"{n / unit:.3f}{suffix}"


def report_table(report: CostReport, fmt: str = "text") -> str:
    """Render as ``text``, ``json`` or ``csv``; the last row is always the total."""
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2)
    total = CostRow("total", report.total_params, report.total_macs, 0)
    rows = list(report.rows) + [total]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(_COLUMNS + ("params_m", "macs_g"))
        for r in rows:
            writer.writerow([r.module, r.params, r.macs, r.applications,
                             f"{r.params / 1e6:.4f}", f"{r.macs / 1e9:.4f}"])
        return buf.getvalue()
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt!r}")
    seconds = report.num_samples / report.sample_rate
    lines = [f"input: {report.num_samples} samples ({seconds:g} s at {report.sample_rate} Hz)",
             f"{'module':<10}{'params':>12}{'':>10}{'MACs':>16}{'':>10}{'runs':>6}"]
    for r in rows:
        if r.module == "total":
            lines.append("-" * 64)
        runs = str(r.applications) if r.applications else ""
        lines.append(f"{r.module:<10}{r.params:>12,}{_human(r.params, 1e6, 'M'):>10}"
                     f"{r.macs:>16,}{_human(r.macs, 1e9, 'G'):>10}{runs:>6}")
    return "\n".join(lines) + "\n"

"""End-to-end separation graph, weight initialization and weight files."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import caf, rtfs, s3, vp
from . import tensor as tn
from .config import ModelConfig
from .container import CONFIG_KEY, blob, blob_text, read_container, write_container
from .errors import ConfigError, FormatError, ShapeError
from .stft import decode_audio, encode_audio, stft
from .store import ParamSpec, WeightStore, conv_specs, tconv_specs

# graph order; the rtfs scope is shared by every block application
MODULES = ("encoder", "vp", "caf", "rtfs", "mask", "decoder")


def module_specs(cfg: ModelConfig) -> dict[str, list[ParamSpec]]:
    ca = cfg.audio_channels
    return {
        "encoder": conv_specs("encoder", ca, 2, (3, 3)),
        "vp": [s.scoped("vp") for s in vp.param_specs(cfg)],
        "caf": [s.scoped("caf") for s in caf.param_specs(ca, cfg.visual_channels, cfg.fusion_heads)],
        "rtfs": [s.scoped("rtfs") for s in rtfs.param_specs(cfg)],
        "mask": [s.scoped("mask") for s in s3.param_specs(ca)],
        "decoder": tconv_specs("decoder", ca, 2, (3, 3)),
    }


def weight_specs(cfg: ModelConfig) -> list[ParamSpec]:
    """Every stored tensor, in graph order."""
    per = module_specs(cfg)
    return [s for m in MODULES for s in per[m]]


def required_tensors(cfg: ModelConfig) -> dict[str, tuple]:
    return {s.name: s.shape for s in weight_specs(cfg)}


def _init_tensor(spec: ParamSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.kind in ("weight", "bias"):
        bound = 1.0 / np.sqrt(spec.fan_in)
        return rng.uniform(-bound, bound, size=spec.shape).astype(np.float32)
    fill = {"scale": 1.0, "shift": 0.0, "slope": 0.25, "running_mean": 0.0, "running_var": 1.0}
    return np.full(spec.shape, fill[spec.kind], dtype=np.float32)


def init_random(cfg: ModelConfig, seed: int = 0) -> WeightStore:
    """Deterministic weights: uniform(+-1/sqrt(fan_in)) drawn in graph order from ``seed``."""
    rng = np.random.default_rng(seed)
    return WeightStore({s.name: _init_tensor(s, rng) for s in weight_specs(cfg)}, cfg)


def zero_biases(store: WeightStore) -> WeightStore:
    """Copy of ``store`` with every additive term (conv biases, norm shifts) set to zero."""
    out = store.copy()
    for s in weight_specs(store.config):
        if s.kind in ("bias", "shift"):
            out[s.name] = np.zeros(s.shape, dtype=np.float32)
    return out


@dataclass
class ModelGraph:
    """A config bound to validated weights, ready to run."""

    config: ModelConfig
    weights: WeightStore

    def scope(self, module: str):
        return self.weights.scope(module)

    def astype(self, dtype) -> "ModelGraph":
        return ModelGraph(self.config, self.weights.astype(dtype))

    @property
    def dtype(self):
        return next(iter(self.weights.values())).dtype


def validate_weights(cfg: ModelConfig, tensors, path=None) -> None:
    need = required_tensors(cfg)
    for name, arr in tensors.items():
        if name == CONFIG_KEY:
            continue
        if name not in need:
            raise FormatError("unknown tensor", path=path, tensor=name)
        if tuple(arr.shape) != tuple(need[name]):
            raise FormatError(f"shape {tuple(arr.shape)} does not match expected "
                              f"{tuple(need[name])}", path=path, tensor=name)
    missing = [n for n in need if n not in tensors]
    if missing:
        raise FormatError(f"{len(missing)} required tensors missing", path=path, tensor=missing[0])


def build(config: ModelConfig, weights=None, seed: int = 0) -> ModelGraph:
    """Bind ``config`` to ``weights`` (random from ``seed`` when omitted)."""
    if weights is None:
        return ModelGraph(config, init_random(config, seed))
    validate_weights(config, weights)
    if not isinstance(weights, WeightStore):
        weights = WeightStore({n: np.asarray(weights[n], dtype=np.float32)
                               for n in required_tensors(config)}, config)
    return ModelGraph(config, weights)


def save_weights(path, store: WeightStore) -> None:
    tensors = {CONFIG_KEY: blob(store.config.to_json())}
    tensors.update(store)
    write_container(path, tensors)


def load_weights(path) -> WeightStore:
    """Read a weight file; the embedded config decides the expected tensors."""
    raw = read_container(path)
    if CONFIG_KEY not in raw:
        raise FormatError("missing embedded config", path=path, tensor=CONFIG_KEY)
    try:
        cfg = ModelConfig.from_dict(json.loads(blob_text(raw[CONFIG_KEY])))
    except (UnicodeDecodeError, json.JSONDecodeError, ConfigError) as exc:
        raise FormatError(f"bad embedded config: {exc}", path=path, tensor=CONFIG_KEY) from exc
    validate_weights(cfg, raw, path)
    return WeightStore({n: raw[n] for n in required_tensors(cfg)}, cfg)


# --------------------------------------------------------------------------
# forward pass
# --------------------------------------------------------------------------


def block_input(step: int, a_j, a0):
    """Input of block application ``step`` (0 = the audio-only block before fusion).

    Applications 0 and 1 take their argument as is; later ones add the encoder
    output back in before running the shared block.
    """
    return a_j if step < 2 else a_j + a0


def forward(graph: ModelGraph, x, v0, trace: dict | None = None):
    """Separate the speaker described by ``v0`` ``(C_v, T_v)`` from mixture ``x`` ``(L,)``.

    Returns a waveform of the same length. Intermediate maps are stored in
    ``trace`` when a dict is given.
    """
    cfg, w = graph.config, graph.weights
    dtype = graph.dtype
    x = x if tn.is_dual(x) else np.asarray(x, dtype=dtype)
    v0 = v0 if tn.is_dual(v0) else np.asarray(v0, dtype=dtype)
    if tn.primal(x).ndim != 1:
        raise ShapeError(f"mixture must be a 1D waveform, got shape {tn.primal(x).shape}")
    length = tn.primal(x).shape[0]
    if length < 2:
        raise ShapeError("mixture needs at least two samples")
    trace = {} if trace is None else trace

    spec = stft(x, cfg.window, cfg.hop)
    a0 = tn.check_finite(encode_audio(spec, w["encoder.weight"], w["encoder.bias"]), "encoder")
    block = graph.scope("rtfs")
    a = rtfs.rtfs_forward(a0, block, cfg) + a0
    trace["a0"], trace["a1"] = a0, a
    v1 = vp.vp_forward(v0, graph.scope("vp"), cfg)
    a = caf.caf_forward(a, v1, graph.scope("caf"), cfg.fusion_heads)
    trace["v1"], trace["fused"] = v1, a
    for step in range(1, cfg.num_blocks):
        inp = block_input(step, a, a0)
        a = rtfs.rtfs_forward(inp, block, cfg) + inp
    trace["a_r"] = a
    mask = s3.make_mask(a, graph.scope("mask"))
    z = s3.s3_apply(mask, a0)
    trace["mask"], trace["z"] = mask, z
    y = decode_audio(z, w["decoder.weight"], w["decoder.bias"], length, cfg.window, cfg.hop)
    return tn.check_finite(y, "output")

"""Named-tensor storage and parameter declarations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

# kinds that are not trained (inference-mode batch-norm statistics)
BUFFER_KINDS = frozenset({"running_mean", "running_var"})


@dataclass(frozen=True)
class ParamSpec:
    """Declaration of one stored tensor.

    ``kind`` drives initialization: ``weight``/``bias`` draw from
    U(-1/sqrt(fan_in), 1/sqrt(fan_in)); ``scale`` starts at 1, ``shift`` at 0,
    ``slope`` (PReLU) at 0.25, and the batch-norm buffers at mean 0 / var 1.
    """

    name: str
    shape: tuple
    kind: str = "weight"
    fan_in: int = 1

    @property
    def trainable(self) -> bool:
        return self.kind not in BUFFER_KINDS

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    def scoped(self, prefix: str) -> "ParamSpec":
        return ParamSpec(f"{prefix}.{self.name}", self.shape, self.kind, self.fan_in)


def conv_specs(name: str, c_out: int, c_in: int, kernel: tuple, groups: int = 1,
               bias: bool = True) -> list[ParamSpec]:
    """Weight ``(c_out, c_in/groups, *kernel)`` and optional bias of a convolution."""
    fan_in = (c_in // groups) * int(np.prod(kernel))
    specs = [ParamSpec(f"{name}.weight", (c_out, c_in // groups) + tuple(kernel), "weight", fan_in)]
    if bias:
        specs.append(ParamSpec(f"{name}.bias", (c_out,), "bias", fan_in))
    return specs


def tconv_specs(name: str, c_in: int, c_out: int, kernel: tuple, bias: bool = True) -> list[ParamSpec]:
    """Transposed convolution: weight ``(c_in, c_out, *kernel)``."""
    fan_in = c_out * int(np.prod(kernel))
    specs = [ParamSpec(f"{name}.weight", (c_in, c_out) + tuple(kernel), "weight", fan_in)]
    if bias:
        specs.append(ParamSpec(f"{name}.bias", (c_out,), "bias", fan_in))
    return specs


def norm_specs(name: str, shape) -> list[ParamSpec]:
    shape = (shape,) if isinstance(shape, int) else tuple(shape)
    return [ParamSpec(f"{name}.weight", shape, "scale"), ParamSpec(f"{name}.bias", shape, "shift")]


def batch_norm_specs(name: str, channels: int) -> list[ParamSpec]:
    return norm_specs(name, channels) + [
        ParamSpec(f"{name}.running_mean", (channels,), "running_mean"),
        ParamSpec(f"{name}.running_var", (channels,), "running_var"),
    ]


class WeightStore(Mapping):
    """Ordered ``name -> float32 array`` map plus the config it was built for."""

    def __init__(self, tensors: dict, config=None):
        self._tensors = dict(tensors)
        self.config = config

    def __getitem__(self, name):
        return self._tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self):
        return len(self._tensors)

    def __setitem__(self, name, value):
        if name not in self._tensors:
            raise KeyError(name)
        value = np.asarray(value, dtype=self._tensors[name].dtype)
        if value.shape != self._tensors[name].shape:
            raise ValueError(f"{name}: shape {value.shape} != {self._tensors[name].shape}")
        self._tensors[name] = value

    def scope(self, prefix: str) -> "Scope":
        return Scope(self, prefix)

    def astype(self, dtype) -> "WeightStore":
        return WeightStore({k: v.astype(dtype) for k, v in self._tensors.items()}, self.config)

    def copy(self) -> "WeightStore":
        return WeightStore({k: v.copy() for k, v in self._tensors.items()}, self.config)


class Scope(Mapping):
    """Read-only view of the tensors under ``prefix.``; names are relative."""

    def __init__(self, store: Mapping, prefix: str):
        self._store = store
        self._prefix = prefix + "." if prefix else ""

    def __getitem__(self, name):
        return self._store[self._prefix + name]

    def __contains__(self, name):
        return (self._prefix + name) in self._store

    def __iter__(self):
        n = len(self._prefix)
        return (k[n:] for k in self._store if k.startswith(self._prefix))

    def __len__(self):
        return sum(1 for _ in self)

    def scope(self, prefix: str) -> "Scope":
        return Scope(self._store, self._prefix + prefix)

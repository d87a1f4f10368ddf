"""Audio-visual speech separation inference with recurrent time-frequency modelling."""

from .config import ModelConfig
from .errors import ConfigError, FormatError, NumericalError, RtfsError, ShapeError
from .model import build, forward, init_random, load_weights, save_weights

__all__ = [
    "ConfigError",
    "FormatError",
    "ModelConfig",
    "NumericalError",
    "RtfsError",
    "ShapeError",
    "build",
    "forward",
    "init_random",
    "load_weights",
    "save_weights",
]
__version__ = "0.1.0"

"""Exception hierarchy shared by the engine, the file formats and the CLI."""


class RtfsError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class ShapeError(RtfsError, ValueError):
    """A tensor shape does not satisfy an operation's contract."""

    exit_code = 2


class ConfigError(RtfsError, ValueError):
    """A model configuration is invalid."""

    exit_code = 2


class FormatError(RtfsError):
    """A file (WAV, weight container, JSON) is malformed or unsupported."""

    exit_code = 3

    def __init__(self, message, path=None, tensor=None):
        self.path = path
        self.tensor = tensor
        parts = [message]
        if tensor is not None:
            parts.append(f"tensor={tensor!r}")
        if path is not None:
            parts.append(f"path={path}")
        super().__init__("; ".join(parts))


class NumericalError(RtfsError, FloatingPointError):
    """A primitive produced NaN or Inf."""

    exit_code = 4

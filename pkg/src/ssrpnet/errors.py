"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Array dimensions do not match what an operation requires."""


class ContractViolation(ValueError):
    """A caller-side precondition was broken (bad distribution, stale cache, ...)."""


class AudioDecodeError(ValueError):
    """WAV container is malformed or truncated."""


class UnsupportedAudioError(AudioDecodeError):
    """WAV container is valid but the codec/layout is not supported."""


class InsufficientAudioError(ValueError):
    """Clip is too short to analyze."""


class InsufficientSamplesError(ValueError):
    """A statistic needs more rows than the data provides."""


class DegenerateVarianceError(ValueError):
    """All eigenvalues are zero; no variance to apportion."""


class SchemaError(ValueError):
    """Manifest file is structurally unusable (missing columns, empty, ...)."""


class ValidationError(ValueError):
    """Manifest parsed but violates dataset invariants."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch

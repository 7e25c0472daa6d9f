from typing import Optional


class LSoftmaxError(Exception):
    """Base L-Softmax Exception"""

    pass


# VALIDATION ERRORS (CLI exit code 1)


class ValidationError(LSoftmaxError):
    """Invalid input, configuration, or file contents."""

    pass


class ShapeMismatch(ValidationError):
    """Array shapes that must compose do not."""

    pass


class ZeroNorm(ValidationError):
    """A feature or classifier vector has (near) zero length and therefore no angle."""

    pass


class ConfigError(ValidationError):
    """An experiment configuration value is unknown or invalid.

    :param key: The ``section.key`` the error refers to.
    :param line: The 1-based line number in the source file, if known.
    """

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        location = []
        if key:
            location.append(f"key '{key}'")
        if line:
            location.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(location)})" if location else message)


class IdxFormatError(ValidationError):
    """Base class for malformed IDX files. ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} at byte offset {offset}")


class BadMagic(IdxFormatError):
    pass


class TruncatedPayload(IdxFormatError):
    pass


class DimensionMismatch(IdxFormatError):
    pass


class EmptySplit(ValidationError):
    """A requested split fraction yields zero samples."""

    pass


class EmptyEvalSet(ValidationError):
    pass


class UnknownDataset(ValidationError):
    pass


class ParamsFormatError(ValidationError):
    """A serialized parameter file is not a readable ``LMSX`` file."""

    pass


# NUMERICAL ERRORS (CLI exit code 2)


class NumericalError(LSoftmaxError):
    pass


class NonFiniteValue(NumericalError):
    """A layer produced NaN or Inf."""

    pass


class NonFiniteGradient(NumericalError):
    """A gradient contains NaN or Inf. Training aborts rather than clipping."""

    def __init__(self, name: str, iteration: int, bad_count: int):
        self.name = name
        self.iteration = iteration
        self.bad_count = bad_count
        super().__init__(
            f"Gradient for '{name}' has {bad_count} non-finite element(s) at iteration {iteration}"
        )


class NonFiniteFunction(NumericalError):
    """A finite-difference evaluation was NaN or Inf."""

    pass


# FETCH ERRORS (CLI exit code 2)


class FetchError(LSoftmaxError):
    pass


class ChecksumMismatch(FetchError):
    pass


class NetworkFailure(FetchError):
    pass

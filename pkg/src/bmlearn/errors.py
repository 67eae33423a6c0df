"""Exception hierarchy shared by every module."""

from __future__ import annotations


class BMLearnError(Exception):
    """Base class for all workbench errors."""


class DimensionError(BMLearnError, ValueError):
    """Vectors or classes over different domains were combined."""


class ParameterError(BMLearnError, ValueError):
    """A numeric parameter is outside its admissible range."""


class ProtocolError(BMLearnError, RuntimeError):
    """An oracle or learner was driven outside its protocol."""


class ClassTooLargeError(BMLearnError, ValueError):
    """Exact search was requested on a class above the configured cap."""


class DegenerateRoundError(BMLearnError, RuntimeError):
    """A boosting round has zero (or negative estimated) normalizer."""


class PreconditionError(BMLearnError, ValueError):
    """A reduction was invoked outside the regime where it is defined."""


class IdentificationError(BMLearnError, RuntimeError):
    """No witness member lies within the identification radius."""


class WitnessViolationError(BMLearnError, RuntimeError):
    """Two witness members are both within the identification radius."""


class StateWidthError(BMLearnError, RuntimeError):
    """A streaming learner's state failed the b-bit round trip."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


class StreamExhaustedError(BMLearnError, RuntimeError):
    """The example stream hit its limit; ``partial`` holds whatever was built."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial

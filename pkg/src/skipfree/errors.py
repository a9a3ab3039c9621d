"""Exception hierarchy."""


class SkipFreeError(Exception):
    """Base class for all errors raised by this package."""


class ModelError(SkipFreeError):
    """A model or query is invalid for the requested computation."""


class ConfigError(SkipFreeError):
    """Malformed configuration input.

    ``pointer`` locates the offending field (e.g. ``queries[2].args.b``).
    """

    def __init__(self, message, pointer=None):
        self.pointer = pointer
        if pointer:
            message = f"{pointer}: {message}"
        super().__init__(message)


class ModeError(ModelError):
    """Float and exact rational scalars were mixed in one computation."""


class SingularGenerator(ModelError):
    """(-Q) is not invertible, i.e. some state is recurrent."""


class RecurrentChain(ModelError):
    """The requested quantity is infinite because states are recurrent."""


class MbpAtZero(ModelError):
    """G(x, 0) requested for a branching process without immigration."""


class NonConvergent(ModelError):
    """A series did not meet its truncation criterion within the term cap."""


class SeriesTruncation(ModelError):
    """The available horizon is too short for the requested evaluation."""


class InvalidFamily(ModelError):
    """Parameters fall outside the admissible range of a closed-form family."""


class ScaleOverflow(ModelError, OverflowError):
    """A scale-function value exceeded the binary64 range."""


class ExcessiveCapping(ModelError):
    """Too many simulated paths hit the jump or time cap with the event pending."""

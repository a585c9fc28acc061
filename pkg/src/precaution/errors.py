"""Exception types shared across the package.

Numerical verdicts (a certificate reporting FAIL, a probe returning Neither)
are data, not exceptions; exceptions are reserved for invalid inputs and
for operations whose preconditions do not hold.
"""


class PrecautionError(Exception):
    """Base class for all package errors."""


class ZeroMarginal(PrecautionError):
    """A posterior was requested for a signal of probability zero."""


class PriorMismatch(PrecautionError):
    """Two signal models that must share a prior do not."""


class StateMismatch(PrecautionError):
    """A signal model's state space differs from the decision model's."""


class DimensionMismatch(PrecautionError):
    """Vectors or sets of incompatible dimension were combined."""


class InfeasibleFirstDecision(PrecautionError):
    """A first-stage decision outside the declared interval."""


class EmptyStarDifference(PrecautionError):
    """The star-difference is empty, so the decomposition check does not apply."""


class DomainViolation(PrecautionError):
    """A payoff function was configured or evaluated outside its domain."""


class NoCertificate(PrecautionError):
    """No first-order certificate candidate exists for the given instance."""


class ConfigError(PrecautionError):
    """An experiment configuration failed validation.

    ``pointer`` is a JSON-pointer-style path to the offending field.
    """

    def __init__(self, message: str, pointer: str = ""):
        self.pointer = pointer
        super().__init__(f"{pointer}: {message}" if pointer else message)

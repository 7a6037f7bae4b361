"""Exception taxonomy shared by all modules.

Validation-type errors mean the input was unusable (CLI exit code 2);
numerical errors mean a solver failed to meet its contract (exit code 3).
"""


class ValidationError(ValueError):
    """Malformed or inconsistent input: bad spec, bad config, bad argument."""


class PreconditionError(ValidationError):
    """A mathematically required hypothesis does not hold for this input."""


class NumericalError(RuntimeError):
    """A solver did not converge or exceeded a refinement/iteration cap."""


class InvariantBreachError(NumericalError):
    """A quantity provably bounded by theory left its admissible range."""

"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: UsageError -> 2, everything else
derived from CoatPlanError -> 1.
"""


class CoatPlanError(Exception):
    """Base class for domain errors (bad data, infeasible requests)."""


class ShapeError(CoatPlanError):
    """Tensor shapes do not satisfy an operation's contract."""


class ConfigError(CoatPlanError):
    """Inconsistent layer/model/experiment configuration."""


class ContractError(CoatPlanError):
    """A precondition of an operation was violated by the caller."""


class ParseError(CoatPlanError):
    """Malformed instance/dataset/checkpoint text."""

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column


class GenerationError(CoatPlanError):
    """Instance generation failed (infeasible parameters or retries exhausted)."""


class OracleError(CoatPlanError):
    """The optimal oracle exhausted its budget; try smaller instance parameters."""


class CurriculumError(CoatPlanError):
    """A curriculum round could not extend the training set."""


class UsageError(CoatPlanError):
    """Bad CLI invocation."""

"""Exception hierarchy.

Everything raised on bad input derives from :class:`ValidationError` (a
``ValueError``), so callers that only care about "was my input wrong" can
catch the builtin.  Failures that happen while doing legitimate work, such
as a training run blowing up, derive from :class:`CrossmapRuntimeError`.
"""


class CrossmapError(Exception):
    """Base class for all package errors."""


class ValidationError(CrossmapError, ValueError):
    """Input violates a documented precondition."""


class ParseError(ValidationError):
    """A file could not be parsed.

    ``line`` is the 1-based line number when the problem is tied to a line.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class ConfigError(ValidationError):
    """Experiment configuration is invalid."""


class CrossmapRuntimeError(CrossmapError, RuntimeError):
    """Work failed after validation passed."""


class TrainingDiverged(CrossmapRuntimeError):
    """Loss became non-finite or exceeded the divergence threshold."""

    def __init__(self, epoch, value):
        self.epoch = epoch
        self.value = value
        super().__init__(f"training diverged at epoch {epoch} (loss={value!r})")

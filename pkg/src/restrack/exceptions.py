"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An operation was called with inputs violating its preconditions."""


class ConfigError(ValueError):
    """A configuration file or parameter set is invalid."""


class ClipParseError(ValueError):
    """A motion clip file is malformed or inconsistent."""


class SimDivergence(RuntimeError):
    """The integrator produced a non-finite or exploding state."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class TrainingDivergence(RuntimeError):
    """A non-finite loss or parameter appeared during optimization."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

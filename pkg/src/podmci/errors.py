"""Exception hierarchy shared across the package."""


class PodMciError(Exception):
    """Base class for all package errors."""


class PreconditionError(PodMciError, ValueError):
    """An input violates an operation's documented precondition."""


class SolverError(PodMciError, RuntimeError):
    """A numerical solver failed to converge or broke down.

    Parameters
    ----------
    message : str
        Human readable description.
    residual : float, optional
        Achieved residual (or last convergence measure) when the failure
        occurred.
    history : list of float, optional
        Convergence history, if the solver keeps one.
    """

    def __init__(self, message, residual=None, history=None):
        super().__init__(message)
        self.residual = residual
        self.history = list(history) if history is not None else []


class AssemblyError(PodMciError):
    """The discrete operator could not be assembled."""


class ConfigError(PodMciError):
    """An experiment configuration failed validation."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


class FormatError(PodMciError, IOError):
    """A persisted file is corrupt or incompatible."""

"""Exception hierarchy shared by all modules."""


class OpialiterError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(OpialiterError, ValueError):
    """A parameter or spec document is malformed or out of range.

    ``field`` names the offending parameter when known.
    """

    def __init__(self, message, field=None):
        self.field = field
        if field is not None and field not in message:
            message = f"{field}: {message}"
        super().__init__(message)


class DimensionMismatchError(OpialiterError, ValueError):
    pass


class DomainEscapeError(OpialiterError):
    def __init__(self, step, distance):
        self.step = step
        self.distance = distance
        super().__init__(
            f"iterate x_{step} left the domain (distance {distance:.3e} > tolerance)"
        )


class NonConvergenceError(OpialiterError):
    def __init__(self, message, **diagnostics):
        self.diagnostics = diagnostics
        detail = ", ".join(f"{k}={v!r}" for k, v in diagnostics.items())
        super().__init__(f"{message} ({detail})" if detail else message)


class InsufficientDataError(OpialiterError, ValueError):
    pass


class NotInLambdaError(OpialiterError, ValueError):
    """psi was requested at a point whose distance sequence does not settle."""


class UnknownCaseError(OpialiterError, KeyError):
    def __init__(self, key, available):
        self.key = key
        self.available = tuple(available)
        super().__init__(f"unknown case {key!r}; available: {', '.join(self.available)}")

    def __str__(self):
        return self.args[0]

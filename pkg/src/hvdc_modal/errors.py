"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """A physical parameter violates its invariants."""


class ScenarioParseError(ValueError):
    """Scenario text could not be parsed or validated.

    ``field`` is the dotted path of the offending entry and ``line`` the
    1-based source line when it is known.
    """

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class BuildError(ValueError):
    """The equivalent network cannot be assembled."""


class SolverError(RuntimeError):
    """Time integration diverged."""

    def __init__(self, message, last_valid_time=None):
        self.last_valid_time = last_valid_time
        super().__init__(message)


class NumericalInstabilityError(RuntimeError):
    """Two inverse-Laplace methods disagree beyond tolerance.

    Both results are attached so callers can inspect the disagreement.
    """

    def __init__(self, message, result=None):
        self.result = result
        super().__init__(message)

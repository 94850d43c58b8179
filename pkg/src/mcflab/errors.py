"""Exception types shared across the package."""


class McfError(Exception):
    pass


class ConfigError(McfError, ValueError):
    """Invalid configuration; ``field`` names the offending key path when known."""

    def __init__(self, message, field=None, line=None):
        self.message = message
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class DomainError(McfError, ValueError):
    """A point or argument lies outside the domain where an operation is defined."""


class InapplicableError(McfError):
    """A check was requested outside the hypotheses it is defined for."""


class StepError(McfError, ArithmeticError):
    """Non-finite value produced by a time step."""

    def __init__(self, message, point_index=None, step_index=None):
        self.point_index = point_index
        self.step_index = step_index
        super().__init__(message)

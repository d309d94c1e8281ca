class QslError(Exception):
    """Base class for every error raised by qsl."""


class InvalidInputError(QslError, ValueError):
    """Malformed operands: non-finite entries, dimension mismatches, broken invariants."""


class DomainError(QslError):
    """The operands are well-formed but lie outside the mathematical domain of the operation."""


class PreconditionError(QslError):
    """A documented precondition of a bound or model does not hold (e.g. a mixed initial state)."""


class DegeneracyError(QslError):
    """Two instantaneous levels cross, so eigenvector derivatives are undefined."""

    def __init__(self, message: str, levels: tuple[int, int]):
        super().__init__(message)
        self.levels = levels


class NumericalError(QslError):
    """Base class for failures of the numerical machinery."""


class IntegrationError(NumericalError):
    """A propagated state left the admissible set; `step` is the offending grid step."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class DivergenceError(NumericalError):
    pass


class StepSizeError(NumericalError):
    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class PoleError(NumericalError):
    """A closed-form rate was evaluated at (or within 1e-9 of) a pole."""

    def __init__(self, message: str, pole: float):
        super().__init__(message)
        self.pole = pole


class NumericalFailureError(NumericalError):
    pass

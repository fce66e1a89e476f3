"""Exception hierarchy."""


class BLFMRACError(Exception):
    """Base class for all package errors."""


class InvalidInputError(BLFMRACError, ValueError):
    pass


class NumericalFailureError(BLFMRACError, ArithmeticError):
    pass


class InfeasibleModelError(BLFMRACError):
    pass


class BarrierBreachError(BLFMRACError):
    """A barrier denominator fell inside its guard band.

    ``barrier`` names the set that was (nearly) left: ``"u"``, ``"u_dot"``
    or ``"e_d"``.
    """

    def __init__(self, barrier, margin, message=None):
        self.barrier = barrier
        self.margin = margin
        super().__init__(message or f"barrier breach on {barrier!r} (margin {margin:.3e})")


class StepFailureError(BLFMRACError):
    def __init__(self, barrier, t, dt):
        self.barrier = barrier
        self.t = t
        self.dt = dt
        super().__init__(
            f"integration step failed at t={t:.6g}: barrier {barrier!r} breached "
            f"even at dt={dt:.3g}"
        )


class InfeasibilityError(BLFMRACError):
    pass


class InfeasibleC1Error(InfeasibilityError):
    pass


class InfeasibleC2Error(InfeasibilityError):
    pass


class DisturbanceMarginError(InfeasibilityError):
    pass


class ScenarioError(BLFMRACError, ValueError):
    pass


class ScenarioParseError(ScenarioError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if field is not None:
            where.append(f"field {field}")
        if line is not None:
            where.append(f"line {line}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)


class ScenarioValidationError(ScenarioError):
    def __init__(self, message, fields=()):
        self.fields = tuple(fields)
        super().__init__(message)

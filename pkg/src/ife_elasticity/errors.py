"""Exception hierarchy shared by all modules."""


class IFEError(Exception):
    """Base class; ``stage`` names the pipeline step that failed."""

    stage = "ife"

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context

    def __str__(self):
        base = super().__str__()
        if not self.context:
            return base
        extra = ", ".join(f"{k}={v!r}" for k, v in self.context.items())
        return f"{base} ({extra})"


class HypothesisViolation(IFEError):
    """The interface breaks (H1)/(H2) on some element at the current mesh size."""

    stage = "classify"


class DegenerateGeometryError(IFEError):
    stage = "classify"


class SingularConstruction(IFEError):
    """The local IFE coefficient system is singular (only possible for linear elements)."""

    stage = "construct"

    def __init__(self, message, det=None, **context):
        super().__init__(message, det=det, **context)
        self.det = det


class ConvergenceError(IFEError):
    stage = "solve"

    def __init__(self, message, residuals=None, **context):
        super().__init__(message, **context)
        self.residuals = list(residuals or [])

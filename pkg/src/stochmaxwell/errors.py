"""Shared exception types."""


class GridMismatchError(ValueError):
    """Operands live on different grids or have wrong node counts."""


class CapabilityError(ValueError):
    """Request exceeds a documented capability limit (grid size, mode count)."""


class NonFiniteFieldError(ValueError):
    """A field carries NaN or Inf entries."""


class StepError(RuntimeError):
    """A time step failed (e.g. Picard iteration did not converge).

    Carries the step index and the last observed residual when available.
    """

    def __init__(self, message, step_index=None, residual=None):
        super().__init__(message)
        self.step_index = step_index
        self.residual = residual


class ConfigError(ValueError):
    """Invalid experiment configuration; ``violations`` lists every problem found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))

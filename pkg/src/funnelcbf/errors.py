"""Exception types shared across the package."""


class DomainError(ValueError):
    """A quantity was evaluated outside the set where it is defined."""


class StructuralAssumptionError(ValueError):
    """A plant violates the relative-degree / definiteness assumptions."""


class DivergenceError(FloatingPointError):
    """Integration produced a non-finite value."""


class MetricsError(ValueError):
    """Metrics were requested for a run that did not complete."""

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status

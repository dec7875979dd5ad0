"""Exception types shared across the package."""


class ScenarioError(ValueError):
    """Scenario file or programmatic scenario definition is invalid."""


class UnboundedReferenceError(ValueError):
    """Finite bounds were requested for a reference family that has none."""


class WrongAlgorithmError(ValueError):
    """A filter-state metric was asked of a trace that has no filter states."""


class ModelViolationError(RuntimeError):
    """An agent model broke a structural guarantee (e.g. singular inertia)."""


class DivergenceError(RuntimeError):
    """State magnitude exceeded the divergence guard during integration."""

    def __init__(self, time: float):
        self.time = time
        super().__init__(
            f"state diverged at t={time:.6f} (magnitude guard 1e9 exceeded)"
        )

"""Exception types shared across the package."""


class ZeroDetuningError(ValueError):
    """Qubit-cavity detuning vanishes, the dispersive expansion is undefined."""


class UnsupportedModelError(ValueError):
    """Operation requires the dispersive model but received another one."""


class IntegrationInstabilityError(RuntimeError):
    """Deterministic or stochastic integration lost accuracy (trace drift)."""


class TruncationError(RuntimeError):
    """Fock-space truncation leak exceeded the allowed bound."""


class DivergenceError(RuntimeError):
    """Reservoir amplitude exceeded the divergence guard."""

    def __init__(self, message, time=None, node=None):
        super().__init__(message)
        self.time = time
        self.node = node


class TrainingError(RuntimeError):
    """Loss became non-finite during gradient descent."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class MissingClassError(ValueError):
    """A reference dataset does not cover all class labels."""

    def __init__(self, message, label=None):
        super().__init__(message)
        self.label = label


class ConfigError(ValueError):
    """Configuration document violates the schema."""

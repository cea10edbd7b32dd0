"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input lies outside the mathematical domain of an operation."""


class ParameterError(ValueError):
    """A configuration or physical parameter violates its admissible range."""


class IntegrationError(RuntimeError):
    """A sample path became non-finite during integration."""

    def __init__(self, path_index: int, step: int):
        self.path_index = path_index
        self.step = step
        super().__init__(
            f"non-finite state on path {path_index} at step {step}"
        )


class ResonantRecursionError(RuntimeError):
    """The series recursion hit a vanishing divisor (degenerate eigenvalue pair)."""

    def __init__(self, index: int):
        self.index = index
        super().__init__(
            f"coefficient equation at order {index} has a vanishing divisor"
        )

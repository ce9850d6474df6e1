"""Exception types shared across the package."""


class ArgumentError(ValueError):
    """Invalid argument or violated precondition."""


class DegeneratePointError(ArithmeticError):
    """Query at (or numerically at) a point where a quantity is unbounded."""


class EmptyDomainError(ValueError):
    """Operation needs a nonempty domain slice."""


class ConvergenceError(RuntimeError):
    """An iterative method failed to reach its tolerance."""

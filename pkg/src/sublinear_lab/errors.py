"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Input violates a documented constraint (bad probabilities, shapes, NaN, ...)."""


class BudgetExceededError(RuntimeError):
    """An exhaustive enumeration would exceed its configured budget."""

    def __init__(self, what, count, budget):
        self.what = what
        self.count = count
        self.budget = budget
        super().__init__(f"{what} count {count} exceeds budget {budget}")


class ConvergenceError(RuntimeError):
    """An iterative solver stopped without meeting its optimality certificate."""

    def __init__(self, message, residual):
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")

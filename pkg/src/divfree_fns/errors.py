"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """A precondition on an argument was violated."""


class DegenerateConfigurationError(ArithmeticError):
    """Two neuron parameters coincide (infinite Riesz energy)."""


class ResourceBudgetError(MemoryError):
    """A requested array would exceed the configured memory budget."""


class AssemblyError(ArithmeticError):
    """A feature or target value was not finite during assembly."""


class SolverError(RuntimeError):
    """A dense factorization failed to converge."""


class DivisionGuardError(ZeroDivisionError):
    """A relative error was requested against a target of zero norm."""


class QuadratureEvaluationError(RuntimeError):
    """An integrand evaluator failed on a chunk of quadrature nodes."""

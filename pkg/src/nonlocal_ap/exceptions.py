"""Exception hierarchy shared by all modules."""


class NonlocalAPError(Exception):
    """Base class for errors raised by this package."""


class DomainError(NonlocalAPError, ValueError):
    """Invalid domain or grid description."""


class KernelError(NonlocalAPError, ValueError):
    """Invalid kernel specification or off-grid query of a table kernel."""


class HypothesisError(NonlocalAPError):
    """A structural hypothesis required by an operation does not hold.

    The CLI maps this to exit code 2.
    """


class ConvergenceError(NonlocalAPError, RuntimeError):
    """An iteration failed to converge or violated a monotonicity guarantee."""

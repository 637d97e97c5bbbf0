"""Exception types shared across the package."""


class StepsizeViolation(ValueError):
    """A stepsize lies outside the validity region of a prox map or iteration."""


class ProxUnavailable(RuntimeError):
    """The requested proximal map or oracle is not available for this function."""


class OutOfBall(ValueError):
    """A starting distance lies outside the certified convergence ball."""

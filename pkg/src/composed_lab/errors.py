class InvalidInput(ValueError):
    """Raised when an argument violates an operation's preconditions."""


class InvalidParameter(ValueError):
    """Raised when a tuning parameter (epsilon, domain, ...) is out of range."""


class InvalidState(RuntimeError):
    """Raised when an object is found in a state its invariants forbid."""

"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """A numerical routine failed to reach its tolerance or produced non-finite values.

    Attributes
    ----------
    achieved : float or None
        The best tolerance/residual reached before giving up, if known.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class ContractError(ValueError):
    """Inputs violate an operation's precondition (shape, grid or dimension mismatch)."""

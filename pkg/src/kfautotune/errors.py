"""Shared exception types."""


class NumericalError(RuntimeError):
    """Linear-algebra failure (non-PD matrix, non-convergence).

    Carries the offending matrix, when available, in ``matrix``.
    """

    def __init__(self, message: str, matrix=None):
        super().__init__(message)
        self.matrix = matrix

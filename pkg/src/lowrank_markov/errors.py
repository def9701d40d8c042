"""Exception types shared across the package."""


class ConvergenceError(RuntimeError):
    """An iterative routine hit its iteration cap without meeting tolerance.

    ``partial`` carries whatever the routine had computed so far (a report,
    an iterate) so callers can inspect or record it.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class RankInfeasibleError(ConvergenceError):
    """Penalty continuation exhausted its schedule above the target rank."""

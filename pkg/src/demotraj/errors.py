"""Exception types shared across the pipeline."""


class InfeasibleProblem(Exception):
    """Raised when an optimization stage cannot satisfy its constraints.

    Carries a diagnostics dict (max violation per constraint group) so the
    CLI can emit a machine-readable error and exit with the infeasible code.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NumericFailure(Exception):
    """A callback produced NaN/Inf or an integrator diverged."""


class IncompleteReplay(Exception):
    """A refinement trace ended before the time map reached the goal."""

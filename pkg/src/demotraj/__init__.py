"""One-shot demonstration smoothing and interactive retiming toolkit."""

from .errors import IncompleteReplay, InfeasibleProblem, NumericFailure

__version__ = "0.1.0"

__all__ = ["InfeasibleProblem", "NumericFailure", "IncompleteReplay", "__version__"]

"""
Exception hierarchy for filecache
"""


class CacheSimError(Exception):
    """Base class for simulator errors"""


class ConfigurationError(CacheSimError, ValueError):
    """Invalid or unsupported problem parameters"""


class DimensionMismatchError(CacheSimError, ValueError):
    """Placement, demands, graph or result sizes disagree"""


class OdeDivergenceError(CacheSimError, ArithmeticError):
    """ODE state became non-finite; the step is too large"""


class DegenerateGainError(CacheSimError, ZeroDivisionError):
    """Coding gain requested for a zero or negative rate"""


class DeliveryInvariantError(CacheSimError, AssertionError):
    """A delivery result is not a valid decodable clique cover"""


class TrialError(CacheSimError):
    """Failure inside one Monte-Carlo trial"""

    def __init__(self, trial: int, message: str):
        super().__init__(f"trial {trial}: {message}")
        self.trial = trial
        self.message = message

    def __reduce__(self):
        # pickled by worker processes
        return type(self), (self.trial, self.message)

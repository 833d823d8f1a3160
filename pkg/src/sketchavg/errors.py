"""Exception hierarchy shared by every sketchavg module."""

from __future__ import annotations


class SketchAvgError(Exception):
    """Base class for all errors raised by sketchavg."""


class ShapeMismatch(SketchAvgError, ValueError):
    pass


class NonFiniteInput(SketchAvgError, ValueError):
    pass


class RankDeficient(SketchAvgError, ArithmeticError):
    """Raised when a triangular factor has a diagonal entry below the rank tolerance."""

    def __init__(self, rank: int, expected: int):
        super().__init__(f"matrix is rank deficient: detected rank {rank} < {expected}")
        self.rank = rank
        self.expected = expected


class NotPowerOfTwo(SketchAvgError, ValueError):
    def __init__(self, n: int):
        super().__init__(f"length {n} is not a power of two")
        self.n = n


class InvalidSpec(SketchAvgError, ValueError):
    pass


class TooLarge(SketchAvgError, ValueError):
    pass


class PersistentRankDeficiency(SketchAvgError, ArithmeticError):
    def __init__(self, attempts: int, last_seed: int):
        super().__init__(
            f"sketched matrix stayed rank deficient after {attempts} draws "
            f"(last seed {last_seed})"
        )
        self.attempts = attempts
        self.last_seed = last_seed


class PolicyUnsatisfiable(SketchAvgError, RuntimeError):
    pass


class RegimeViolation(SketchAvgError, ValueError):
    pass


class MissingCoherence(SketchAvgError, ValueError):
    pass


class InvalidBeta(SketchAvgError, ValueError):
    pass


class InvalidDelta(SketchAvgError, ValueError):
    pass


class ConditionUnsatisfied(SketchAvgError, ValueError):
    pass


class SketchTooSmall(SketchAvgError, ValueError):
    def __init__(self, m: int, d: int):
        super().__init__(f"private sketch size m={m} does not exceed d+1={d + 1}")
        self.m = m
        self.d = d


class PrivacyUnsupported(SketchAvgError, ValueError):
    pass

"""Closed-form error predictions and bias bounds for averaged sketches.

All predictors return finite, nonnegative numbers on their domain and raise
:class:`~sketchavg.errors.RegimeViolation` outside it; nothing here returns
NaN.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import linalg
from .errors import MissingCoherence, RegimeViolation
from .sketch import SketchKind


def _positive_int(name: str, value) -> int:
    if int(value) != value or value < 1:
        raise RegimeViolation(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def gaussian_left_error(d: int, m: int, q: int = 1) -> float:
    """Expected relative cost gap ``(E f(x_bar) - f*) / f*`` for Gaussian left sketches.

    Equals ``(1/q) * d / (m - d - 1)``; requires ``m > d + 1``.
    """
    d, m, q = _positive_int("d", d), _positive_int("m", m), _positive_int("q", q)
    if m <= d + 1:
        raise RegimeViolation(f"need m > d + 1, got m={m}, d={d}")
    return d / (m - d - 1) / q


def gaussian_left_prob_bound(d: int, m: int, q: int, epsilon: float, c1: float) -> float:
    """Lower bound on ``P[(f(x_bar) - f*)/f* <= epsilon/q]``, clamped at 0.

    ``c1`` is the (unspecified) constant in the invertibility probability
    ``1 - exp(-c1 m)`` of one Gaussian sketch.
    """
    rate = gaussian_left_error(d, m, 1)
    if not epsilon > 0 or not c1 > 0:
        raise RegimeViolation(f"epsilon and c1 must be positive, got {epsilon}, {c1}")
    invertible = (-math.expm1(-c1 * m)) ** q
    return max(0.0, invertible * (1.0 - rate / epsilon))


def gaussian_right_error(n: int, d: int, m: int, q: int = 1) -> float:
    """Expected ``E||x_bar - x*||^2 / ||x*||^2`` for Gaussian right sketches.

    Equals ``(1/q) * (d - n) / (m - n - 1)``; requires ``d > n`` and ``m > n + 1``.
    """
    n, d, m, q = (_positive_int(k, v) for k, v in (("n", n), ("d", d), ("m", m), ("q", q)))
    if d <= n:
        raise RegimeViolation(f"right sketch needs d > n, got n={n}, d={d}")
    if m <= n + 1:
        raise RegimeViolation(f"need m > n + 1, got m={m}, n={n}")
    return (d - n) / (m - n - 1) / q


def z_norm_bound(
    kind,
    n: int,
    d: int,
    m: int,
    f_star: float,
    max_lev: float | None = None,
    min_lev: float | None = None,
) -> float:
    """Upper bound on ``E||U^T S^T S b_perp||^2`` for one sketch of the given kind."""
    kind = SketchKind(kind)
    n, d, m = _positive_int("n", n), _positive_int("d", d), _positive_int("m", m)
    if not (f_star >= 0 and math.isfinite(f_star)):
        raise RegimeViolation(f"f_star must be finite and >= 0, got {f_star}")
    if kind is SketchKind.ROS:
        if min_lev is None:
            raise MissingCoherence("ROS bound needs min_lev")
        return d / m * (1.0 - 2.0 * min_lev / d) * f_star
    if kind is SketchKind.UNIFORM_WITH:
        if max_lev is None:
            raise MissingCoherence("uniform sampling bound needs max_lev")
        return n / m * max_lev * f_star
    if kind is SketchKind.UNIFORM_WITHOUT:
        if max_lev is None:
            raise MissingCoherence("uniform sampling bound needs max_lev")
        if m > n:
            raise RegimeViolation(f"sampling without replacement needs m <= n, got m={m}, n={n}")
        if n == 1:
            return 0.0
        return n / m * (n - m) / (n - 1) * max_lev * f_star
    if kind is SketchKind.LEVERAGE:
        return d / m * f_star
    raise RegimeViolation(f"no bias bound for sketch kind {kind.value}")


def bias_bound(
    kind,
    n: int,
    d: int,
    m: int,
    f_star: float,
    epsilon: float,
    max_lev: float | None = None,
    min_lev: float | None = None,
) -> float:
    """Bound on ``||E[A x_hat] - A x*||`` for a single sketch: ``sqrt(4 eps B)``.

    ``B`` is the kind-specific bound from :func:`z_norm_bound` and
    ``epsilon`` in (0, 1) is the assumed spectral deviation
    ``(1-eps) I <= (U^T S^T S U)^{-1} <= (1+eps) I``.
    """
    if not 0.0 < epsilon < 1.0:
        raise RegimeViolation(f"epsilon must lie in (0, 1), got {epsilon}")
    B = z_norm_bound(kind, n, d, m, f_star, max_lev, min_lev)
    return math.sqrt(4.0 * epsilon * max(B, 0.0))


@dataclass(frozen=True)
class CoherenceStats:
    max_lev: float
    min_lev: float
    leverage: np.ndarray
    f_star: float | None = None


def coherence_stats(A, b=None) -> CoherenceStats:
    """Extreme leverage scores of ``A`` (and ``f* = min ||Ax - b||^2`` when ``b`` is given)."""
    lev = linalg.leverage_scores(A)
    f_star = None
    if b is not None:
        f_star = linalg.residual_cost(A, linalg.lstsq_solve(A, b), b)
    return CoherenceStats(float(lev.max()), float(lev.min()), lev, f_star)


@dataclass(frozen=True)
class TheoryReport:
    kind: str
    mode: str
    n: int | None
    d: int
    m: int
    q: int
    epsilon: float | None
    f_star: float | None
    max_lev: float | None
    min_lev: float | None
    predicted_relative_error: float | None
    bias_bound: float | None

    def as_row(self) -> dict:
        return asdict(self)


def predict(
    kind,
    d: int,
    m: int,
    q: int = 1,
    *,
    n: int | None = None,
    mode: str = "left",
    epsilon: float | None = None,
    f_star: float | None = None,
    max_lev: float | None = None,
    min_lev: float | None = None,
) -> TheoryReport:
    """Collect every prediction available for one configuration.

    The exact error rate is only known for Gaussian sketches; bias bounds
    need ``epsilon``, ``f_star`` and ``n`` (plus the coherence statistic the
    kind requires).
    """
    kind = SketchKind(kind)
    predicted = None
    bias = None
    if kind is SketchKind.GAUSSIAN:
        if mode == "left":
            predicted = gaussian_left_error(d, m, q)
        elif mode == "right":
            if n is None:
                raise RegimeViolation("right-sketch prediction needs n")
            predicted = gaussian_right_error(n, d, m, q)
        else:
            raise RegimeViolation(f"unknown mode {mode!r}")
    elif kind in (SketchKind.ROS, SketchKind.UNIFORM_WITH, SketchKind.UNIFORM_WITHOUT, SketchKind.LEVERAGE):
        if epsilon is not None and f_star is not None and n is not None:
            bias = bias_bound(kind, n, d, m, f_star, epsilon, max_lev, min_lev)
    return TheoryReport(
        kind.value, mode, n, d, m, q, epsilon, f_star, max_lev, min_lev, predicted, bias
    )

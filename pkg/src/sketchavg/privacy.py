"""Sketch sizing for (eps, delta)-differentially private Gaussian projections.

Publishing ``S_k A_c`` with ``A_c = [A, b]`` (n x (d+1)) and ``S_k`` Gaussian
is private when the smallest singular value of ``A_c`` exceeds a threshold
``w`` that grows with the sketch size. Inverting that threshold gives the
largest admissible ``m``. With ``q`` workers, the ``q`` sketches together
act as one sketch of size ``m q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import (
    ConditionUnsatisfied,
    InvalidBeta,
    InvalidDelta,
    PrivacyUnsupported,
    SketchTooSmall,
)
from .sketch import SketchKind

BETA_MIN = 1.0 + math.log(4.0)


@dataclass(frozen=True)
class PrivacyParams:
    """Inputs for privacy sizing.

    ``B0`` bounds every entry of the published matrix, ``sigma0`` satisfies
    ``sigma_min(A_c^T A_c / n) = sigma0^2``, and ``delta = 4 exp(-beta)``.
    """

    n: int
    d: int
    B0: float
    sigma0: float
    eps: float
    beta: float
    q: int = 1

    def __post_init__(self):
        if self.n < 1 or self.d < 1 or self.q < 1:
            raise ValueError(f"n, d, q must be positive, got {self.n}, {self.d}, {self.q}")
        if not self.B0 > 0 or not self.sigma0 > 0:
            raise ValueError(f"B0 and sigma0 must be positive, got {self.B0}, {self.sigma0}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not self.beta > BETA_MIN:
            raise InvalidBeta(f"beta must exceed 1 + ln 4 = {BETA_MIN:.6f}, got {self.beta}")

    @property
    def delta(self) -> float:
        return delta_of(self.beta)


def delta_of(beta: float) -> float:
    """``delta = 4 e^{-beta}``; below ``1/e`` for every admissible ``beta``."""
    if not beta > BETA_MIN:
        raise InvalidBeta(f"beta must exceed 1 + ln 4 = {BETA_MIN:.6f}, got {beta}")
    return 4.0 * math.exp(-beta)


def check_condition(p: PrivacyParams) -> bool:
    """Whether ``n/d >= (3 + 2 beta/eps) B0^2 / sigma0^2``."""
    return p.n / p.d >= (3.0 + 2.0 * p.beta / p.eps) * p.B0**2 / p.sigma0**2


def sketch_size_bound(p: PrivacyParams) -> float:
    """Real-valued bound on the total published sketch size (before dividing by q)."""
    ratio = (p.sigma0**2 * p.n) / (p.B0**2 * p.d)
    inner = (ratio - 1.0) * p.eps * p.beta / (p.eps + p.beta) - 2.0 * p.beta
    return inner**2 / (8.0 * p.beta)


def max_private_sketch_size(p: PrivacyParams, kind=SketchKind.GAUSSIAN) -> int:
    """Largest per-worker sketch size keeping all ``q`` published sketches private.

    Returns ``floor(bound / q)``; raises :class:`ConditionUnsatisfied` when the
    data condition fails and :class:`SketchTooSmall` when the result does not
    exceed ``d + 1``.
    """
    kind = SketchKind(kind)
    if kind is not SketchKind.GAUSSIAN:
        raise PrivacyUnsupported(
            f"privacy sizing is only available for Gaussian sketches, not {kind.value}"
        )
    if not check_condition(p):
        raise ConditionUnsatisfied(
            f"n/d = {p.n / p.d:.6g} < (3 + 2 beta/eps) B0^2/sigma0^2 = "
            f"{(3 + 2 * p.beta / p.eps) * p.B0**2 / p.sigma0**2:.6g}"
        )
    m = math.floor(sketch_size_bound(p) / p.q)
    if m <= p.d + 1:
        raise SketchTooSmall(m, p.d)
    return m


def theorem3_w(B: float, m: int, eps: float, delta: float) -> float:
    """Smallest ``sigma_min`` certifying privacy of one m-row Gaussian projection.

    ``w^2 = B^2 (1 + ((1 + eps/L)/eps) (2 sqrt(2 m L) + 2 L))`` with
    ``L = ln(4/delta)``; ``B`` bounds the row norms of the published matrix.
    """
    if not 0.0 < delta < 1.0 / math.e:
        raise InvalidDelta(f"delta must lie in (0, 1/e), got {delta}")
    if not (B > 0 and m > 0 and eps > 0):
        raise ValueError(f"B, m, eps must be positive, got {B}, {m}, {eps}")
    L = math.log(4.0 / delta)
    w2 = B**2 * (1.0 + (1.0 + eps / L) / eps * (2.0 * math.sqrt(2.0 * m * L) + 2.0 * L))
    return math.sqrt(w2)


def params_from_matrix(M, eps: float, beta: float, q: int = 1, mode: str = "left") -> PrivacyParams:
    """Measure ``B0`` and ``sigma0`` on the matrix that will be published.

    In left mode ``M`` is the concatenated ``A_c = [A, b]`` (n x (d+1)), so
    ``d`` is ``cols - 1``. In right mode ``M`` is ``A`` itself and the
    published matrix is ``A^T``, which swaps the roles of n and d.
    """
    M = linalg.as_matrix(M)
    if mode == "right":
        P = M.T
        n, d = P.shape
    elif mode == "left":
        P = M
        n, d = P.shape[0], P.shape[1] - 1
    else:
        raise ValueError(f"unknown mode {mode!r}")
    B0 = float(np.abs(P).max())
    s_min = float(np.linalg.svd(P, compute_uv=False).min())
    return PrivacyParams(n, d, B0, s_min / math.sqrt(n), eps, beta, q)

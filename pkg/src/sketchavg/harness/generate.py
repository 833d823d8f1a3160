"""Synthetic regression problems."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import InvalidSpec
from ..rng import generator

DISTRIBUTIONS = ("gaussian", "student_t")


@dataclass(frozen=True)
class GeneratorSpec:
    """Shape and distribution of a synthetic problem.

    With ``planted`` the target is ``b = A x_truth + noise_std * N(0, I)``
    with ``x_truth ~ N(0, I)``; otherwise ``b ~ N(0, I)``.
    """

    n: int
    d: int
    distribution: str = "gaussian"
    df: float | None = None
    noise_std: float = 0.1
    planted: bool = True

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise InvalidSpec(f"n and d must be >= 1, got {self.n}, {self.d}")
        if self.distribution not in DISTRIBUTIONS:
            raise InvalidSpec(f"distribution must be one of {DISTRIBUTIONS}, got {self.distribution!r}")
        if self.distribution == "student_t":
            if self.df is None or not self.df > 1:
                raise InvalidSpec(f"student_t needs df > 1, got {self.df}")
        elif self.df is not None:
            raise InvalidSpec("df is only meaningful for student_t")
        if not self.noise_std >= 0:
            raise InvalidSpec(f"noise_std must be >= 0, got {self.noise_std}")

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, data: dict) -> GeneratorSpec:
        unknown = set(data) - {"n", "d", "distribution", "df", "noise_std", "planted"}
        if unknown:
            raise InvalidSpec(f"unknown generator fields: {sorted(unknown)}")
        return cls(**data)


def student_t(rng: np.random.Generator, df: float, size) -> np.ndarray:
    """Student-t draws as ``Z / sqrt(chi2_df / df)``."""
    z = rng.standard_normal(size)
    chi2 = rng.chisquare(df, size)
    return z / np.sqrt(chi2 / df)


def generate(gspec: GeneratorSpec, seed: int):
    """Draw ``(A, b, x_truth)``; ``x_truth`` is ``None`` unless planted.

    Draw order is fixed (A, then x_truth, then noise or b) so the output is
    a deterministic function of ``(gspec, seed)``.
    """
    rng = generator(seed)
    shape = (gspec.n, gspec.d)
    if gspec.distribution == "gaussian":
        A = rng.standard_normal(shape)
    else:
        A = student_t(rng, gspec.df, shape)
    if gspec.planted:
        x_truth = rng.standard_normal(gspec.d)
        b = A @ x_truth + gspec.noise_std * rng.standard_normal(gspec.n)
        return A, b, x_truth
    return A, rng.standard_normal(gspec.n), None

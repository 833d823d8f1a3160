"""Random sketching operators ``S`` (m x n) with ``E[S^T S] = I_n``.

A sketch is described by an immutable :class:`SketchSpec` and drawn from an
integer seed with :func:`draw`, which returns an operator that can apply
``S`` to matrices (``S @ M``) and ``S^T`` to vectors. The same seed always
yields the same operator, so ``apply_left``, ``apply_right`` and
``materialize`` agree on what ``S`` is.

Scalings per family:

* gaussian: i.i.d. N(0, 1/m) entries.
* uniform_with / uniform_without: rows ``sqrt(n/m) e_j^T`` with ``j`` uniform,
  sampled with or without replacement.
* leverage: rows ``e_j^T / sqrt(m p_j)`` with ``p_j = l_j / d`` (sampling with
  replacement).
* ros: ``sqrt(n/m) P (H / sqrt(n)) D`` with P sampling rows with replacement,
  H Sylvester-Hadamard and D random signs. ``n`` is zero-padded to the next
  power of two.
* sjlt: every column holds ``s`` entries ``+-1/sqrt(s)`` at distinct rows.
* hybrid: uniform sampling without replacement down to ``m_prime`` rows
  (scaled by ``sqrt(n/m_prime)``), followed by the ``inner`` sketch to ``m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np
import scipy.sparse

from .errors import InvalidSpec, ShapeMismatch, TooLarge
from .linalg import as_matrix, as_vector, fwht
from .rng import generator

MATERIALIZE_LIMIT = 4096
# Gaussian sketches are generated in column blocks of at most this many entries.
_GAUSS_BLOCK_ELEMS = 1 << 22
_GAUSS_MAX_BLOCK = 4096
# Gaussian blocks are kept in memory between passes below this many entries.
_GAUSS_CACHE_ELEMS = 1 << 22


class SketchKind(str, Enum):
    GAUSSIAN = "gaussian"
    ROS = "ros"
    UNIFORM_WITH = "uniform_with"
    UNIFORM_WITHOUT = "uniform_without"
    LEVERAGE = "leverage"
    SJLT = "sjlt"
    HYBRID = "hybrid"


def _as_count(value, name: str) -> int:
    if isinstance(value, bool) or int(value) != value:
        raise InvalidSpec(f"{name} must be an integer, got {value!r}")
    return int(value)


@dataclass(frozen=True)
class SketchSpec:
    """Sketch family plus its dimensions.

    ``s`` is only used by SJLT; ``m_prime`` and ``inner`` only by the hybrid
    sketch, whose ``inner.m`` must equal ``m``.
    """

    kind: SketchKind
    m: int
    s: int | None = None
    m_prime: int | None = None
    inner: SketchSpec | None = None

    def __post_init__(self):
        try:
            kind = SketchKind(self.kind)
        except ValueError:
            raise InvalidSpec(f"unknown sketch kind {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        m = _as_count(self.m, "m")
        object.__setattr__(self, "m", m)
        if m < 1:
            raise InvalidSpec(f"m must be >= 1, got {m}")

        if kind is SketchKind.SJLT:
            if self.s is None:
                raise InvalidSpec("sjlt sketch needs s (nonzeros per column)")
            s = _as_count(self.s, "s")
            if not 1 <= s <= m:
                raise InvalidSpec(f"sjlt needs 1 <= s <= m, got s={s}, m={m}")
            object.__setattr__(self, "s", s)
        elif self.s is not None:
            raise InvalidSpec(f"s is only meaningful for sjlt, not {kind.value}")

        if kind is SketchKind.HYBRID:
            if self.m_prime is None or self.inner is None:
                raise InvalidSpec("hybrid sketch needs m_prime and inner")
            m_prime = _as_count(self.m_prime, "m_prime")
            object.__setattr__(self, "m_prime", m_prime)
            if m_prime < m:
                raise InvalidSpec(f"hybrid needs m <= m_prime, got m={m}, m_prime={m_prime}")
            inner = self.inner
            if isinstance(inner, dict):
                inner = SketchSpec.from_dict({"m": m, **inner})
                object.__setattr__(self, "inner", inner)
            if inner.kind in (SketchKind.HYBRID, SketchKind.LEVERAGE):
                raise InvalidSpec(f"hybrid inner sketch cannot be {inner.kind.value}")
            if inner.m != m:
                raise InvalidSpec(f"hybrid inner.m={inner.m} must equal m={m}")
        elif self.m_prime is not None or self.inner is not None:
            raise InvalidSpec(f"m_prime/inner are only meaningful for hybrid, not {kind.value}")

    @classmethod
    def hybrid(cls, m: int, m_prime: int, inner: str = "gaussian", s: int | None = None) -> SketchSpec:
        return cls(SketchKind.HYBRID, m, m_prime=m_prime, inner=cls(inner, m, s=s))

    @property
    def needs_leverage(self) -> bool:
        return self.kind is SketchKind.LEVERAGE

    def check(self, n: int) -> None:
        """Validate the invariants that depend on the sketched dimension ``n``."""
        if self.kind is SketchKind.UNIFORM_WITHOUT and self.m > n:
            raise InvalidSpec(f"uniform_without needs m <= n, got m={self.m}, n={n}")
        if self.kind is SketchKind.HYBRID:
            if self.m_prime > n:
                raise InvalidSpec(f"hybrid needs m_prime <= n, got m_prime={self.m_prime}, n={n}")
            self.inner.check(self.m_prime)

    def label(self) -> str:
        if self.kind is SketchKind.HYBRID:
            return f"hybrid+{self.inner.kind.value}"
        return self.kind.value

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind.value, "m": self.m}
        if self.s is not None:
            out["s"] = self.s
        if self.m_prime is not None:
            out["m_prime"] = self.m_prime
        if self.inner is not None:
            out["inner"] = self.inner.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SketchSpec:
        unknown = set(data) - {"kind", "m", "s", "m_prime", "inner"}
        if unknown:
            raise InvalidSpec(f"unknown sketch fields: {sorted(unknown)}")
        if "kind" not in data or "m" not in data:
            raise InvalidSpec("sketch needs 'kind' and 'm'")
        inner = data.get("inner")
        if inner is not None:
            inner = cls.from_dict({"m": data["m"], **inner})
        return cls(data["kind"], data["m"], s=data.get("s"), m_prime=data.get("m_prime"), inner=inner)


@dataclass(frozen=True)
class SketchedProblem:
    SA: np.ndarray
    Sb: np.ndarray


def _scale_rows(M: np.ndarray, w) -> np.ndarray:
    if np.ndim(w) == 0 or M.ndim == 1:
        return M * w
    return M * w[:, None]


class _Gaussian:
    def __init__(self, m: int, n: int, rng: np.random.Generator):
        self.m, self.n = m, n
        self._seed = int(rng.integers(0, 2**63))
        self._block = max(1, min(_GAUSS_MAX_BLOCK, _GAUSS_BLOCK_ELEMS // m))
        self._cache = None

    def _blocks(self):
        if self._cache is not None:
            yield from self._cache
            return
        g = generator(self._seed)
        scale = 1.0 / math.sqrt(self.m)
        keep = [] if self.m * self.n <= _GAUSS_CACHE_ELEMS else None
        for start in range(0, self.n, self._block):
            stop = min(self.n, start + self._block)
            G = g.standard_normal((self.m, stop - start))
            G *= scale
            if keep is not None:
                keep.append((start, stop, G))
            yield start, stop, G
        self._cache = keep

    def apply(self, *mats):
        outs = [np.zeros((self.m,) + M.shape[1:]) for M in mats]
        for start, stop, G in self._blocks():
            for out, M in zip(outs, mats):
                out += G @ M[start:stop]
        return outs

    def apply_t(self, z):
        x = np.empty(self.n)
        for start, stop, G in self._blocks():
            x[start:stop] = G.T @ z
        return x


class _Rows:
    """Row-sampling sketch: row i of S is ``w_i e_{idx_i}^T``."""

    def __init__(self, m: int, n: int, idx: np.ndarray, w):
        self.m, self.n = m, n
        self.idx = idx
        self.w = w

    def apply(self, *mats):
        return [_scale_rows(M[self.idx], self.w) for M in mats]

    def apply_t(self, z):
        x = np.zeros(self.n)
        np.add.at(x, self.idx, self.w * z)
        return x


class _ROS:
    def __init__(self, m: int, n: int, rng: np.random.Generator):
        self.m, self.n = m, n
        self.n_pad = 1 << max(0, (n - 1).bit_length())
        self.signs = rng.integers(0, 2, self.n_pad) * 2.0 - 1.0
        self.idx = rng.integers(0, self.n_pad, m)
        self.scale = math.sqrt(self.n_pad / m) / math.sqrt(self.n_pad)

    def apply(self, *mats):
        cols = [M.reshape(M.shape[0], -1) for M in mats]
        width = sum(c.shape[1] for c in cols)
        X = np.zeros((self.n_pad, width))
        X[: self.n] = np.hstack(cols)
        X *= self.signs[:, None]
        Y = fwht(X)[self.idx]
        Y *= self.scale
        outs, at = [], 0
        for M, c in zip(mats, cols):
            block = Y[:, at:at + c.shape[1]]
            outs.append(block.reshape((self.m,) + M.shape[1:]))
            at += c.shape[1]
        return outs

    def apply_t(self, z):
        y = np.zeros(self.n_pad)
        np.add.at(y, self.idx, self.scale * z)
        return (fwht(y) * self.signs)[: self.n]


def _distinct_rows(rng: np.random.Generator, n: int, m: int, s: int) -> np.ndarray:
    """``n`` independent draws of ``s`` distinct values from ``range(m)``."""
    if 2 * s > m:
        return np.argsort(rng.random((n, m)), axis=1)[:, :s]
    rows = rng.integers(0, m, (n, s))
    while True:
        srt = np.sort(rows, axis=1)
        bad = np.flatnonzero((srt[:, 1:] == srt[:, :-1]).any(axis=1))
        if bad.size == 0:
            return rows
        rows[bad] = rng.integers(0, m, (bad.size, s))


class _SJLT:
    def __init__(self, m: int, n: int, s: int, rng: np.random.Generator):
        self.m, self.n = m, n
        rows = _distinct_rows(rng, n, m, s)
        signs = rng.integers(0, 2, (n, s)) * 2.0 - 1.0
        cols = np.repeat(np.arange(n), s)
        vals = signs.ravel() / math.sqrt(s)
        self.S = scipy.sparse.csr_matrix((vals, (rows.ravel(), cols)), shape=(m, n))

    def apply(self, *mats):
        return [np.asarray(self.S @ M) for M in mats]

    def apply_t(self, z):
        return np.asarray(self.S.T @ z)


class _Hybrid:
    def __init__(self, spec: SketchSpec, n: int, rng: np.random.Generator):
        self.m, self.n = spec.m, n
        self.idx = rng.choice(n, spec.m_prime, replace=False)
        self.scale = math.sqrt(n / spec.m_prime)
        self.inner = _build(spec.inner, spec.m_prime, rng, None)

    def apply(self, *mats):
        return self.inner.apply(*[M[self.idx] * self.scale for M in mats])

    def apply_t(self, z):
        x = np.zeros(self.n)
        x[self.idx] = self.scale * self.inner.apply_t(z)
        return x


def _build(spec: SketchSpec, n: int, rng: np.random.Generator, lev):
    m, kind = spec.m, spec.kind
    if kind is SketchKind.GAUSSIAN:
        return _Gaussian(m, n, rng)
    if kind is SketchKind.UNIFORM_WITH:
        return _Rows(m, n, rng.integers(0, n, m), math.sqrt(n / m))
    if kind is SketchKind.UNIFORM_WITHOUT:
        return _Rows(m, n, rng.choice(n, m, replace=False), math.sqrt(n / m))
    if kind is SketchKind.LEVERAGE:
        p = lev / lev.sum()
        idx = rng.choice(n, m, p=p)
        return _Rows(m, n, idx, 1.0 / np.sqrt(m * p[idx]))
    if kind is SketchKind.ROS:
        return _ROS(m, n, rng)
    if kind is SketchKind.SJLT:
        return _SJLT(m, n, spec.s, rng)
    return _Hybrid(spec, n, rng)


def _check_leverage(spec: SketchSpec, n: int, lev):
    if not spec.needs_leverage:
        return None
    if lev is None:
        raise InvalidSpec("leverage sketch needs precomputed leverage scores")
    lev = as_vector(lev, n, name="lev")
    if (lev < 0).any() or lev.sum() <= 0:
        raise InvalidSpec("leverage scores must be nonnegative with a positive sum")
    return lev


def draw(spec: SketchSpec, n: int, seed: int, lev=None):
    """Draw one sketch of an ``n``-dimensional space, fully determined by ``seed``.

    The returned operator has ``apply(*mats)`` (``S @ M`` for each argument,
    returned as a list) and ``apply_t(z)`` (``S^T z``).
    """
    spec.check(n)
    lev = _check_leverage(spec, n, lev)
    return _build(spec, n, generator(seed), lev)


def apply_left(spec: SketchSpec, A, b, seed: int, lev=None) -> SketchedProblem:
    """Sketch the rows of a regression problem: returns ``(S A, S b)``."""
    A = as_matrix(A)
    b = as_vector(b, A.shape[0])
    SA, Sb = draw(spec, A.shape[0], seed, lev).apply(A, b)
    return SketchedProblem(SA, Sb)


def apply_right(spec: SketchSpec, A, seed: int, lev=None) -> np.ndarray:
    """Sketch the columns (features) of ``A``: returns ``A S^T`` with S of size m x d."""
    A = as_matrix(A)
    (SAt,) = draw(spec, A.shape[1], seed, lev).apply(A.T)
    return np.ascontiguousarray(SAt.T)


def materialize(spec: SketchSpec, n: int, seed: int, lev=None) -> np.ndarray:
    """Explicit m x n matrix of the sketch drawn from ``seed`` (small ``n`` only)."""
    if n > MATERIALIZE_LIMIT:
        raise TooLarge(f"refusing to materialize a sketch with n={n} > {MATERIALIZE_LIMIT}")
    if n < 1:
        raise ShapeMismatch(f"n must be positive, got {n}")
    (S,) = draw(spec, n, seed, lev).apply(np.eye(n))
    return S

"""Distributed sketch-and-solve with model averaging.

Each of ``q`` workers draws an independent sketch, solves the small sketched
problem, and returns its estimate; the master averages whichever estimates
its straggler policy admits. Left mode solves overdetermined least squares
``min ||Ax - b||``; right mode solves the minimum-norm problem ``Ax = b``
with ``n < d`` by sketching the feature space.
"""

from __future__ import annotations

import logging
import math
import os
import time
import warnings
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import linalg
from .errors import PersistentRankDeficiency, PolicyUnsatisfiable, RankDeficient, ShapeMismatch
from .linalg import as_matrix, as_vector
from .rng import generator, retry_seed, splitmix64, worker_seed
from .sketch import SketchSpec, draw

log = logging.getLogger(__name__)

DEFAULT_MAX_RETRIES = 4
_DELAY_STREAM = 0xD1B54A32D192ED03


class Mode(str, Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass
class WorkerOutput:
    index: int
    x_hat: np.ndarray
    seed_used: int
    retries: int
    elapsed: float


@dataclass
class AveragedEstimate:
    x_bar: np.ndarray
    q_used: int
    prefix_errors: list[tuple[int, float]] | None = None
    workers: list[WorkerOutput] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def retries(self) -> int:
        return sum(w.retries for w in self.workers)


# -- straggler policies -----------------------------------------------------

@dataclass(frozen=True)
class WaitAll:
    pass


@dataclass(frozen=True)
class FirstK:
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"FirstK needs k >= 1, got {self.k}")


@dataclass(frozen=True)
class Deadline:
    seconds: float
    min_k: int = 1

    def __post_init__(self):
        if self.min_k < 1:
            raise ValueError(f"Deadline needs min_k >= 1, got {self.min_k}")
        if self.seconds < 0:
            raise ValueError(f"Deadline needs seconds >= 0, got {self.seconds}")


StragglerPolicy = WaitAll | FirstK | Deadline


@dataclass(frozen=True)
class ExponentialDelay:
    """Simulated per-worker latency ~ Exponential(rate), drawn from the master seed."""

    rate: float

    def sample(self, q: int, master_seed: int) -> np.ndarray:
        g = generator(splitmix64(int(master_seed) ^ _DELAY_STREAM))
        return g.exponential(1.0 / self.rate, q)


@dataclass(frozen=True)
class FixedDelays:
    delays: tuple[float, ...]

    def sample(self, q: int, master_seed: int) -> np.ndarray:
        if len(self.delays) < q:
            raise ValueError(f"FixedDelays has {len(self.delays)} entries for q={q} workers")
        return np.asarray(self.delays[:q], dtype=float)


def select_arrivals(delays: np.ndarray, policy: StragglerPolicy) -> list[int]:
    """Indices (0-based) of admitted workers, in simulated arrival order."""
    order = [int(i) for i in np.argsort(delays, kind="stable")]
    if isinstance(policy, WaitAll):
        return order
    if isinstance(policy, FirstK):
        if policy.k > len(order):
            raise PolicyUnsatisfiable(f"FirstK({policy.k}) with only {len(order)} workers")
        return order[: policy.k]
    if isinstance(policy, Deadline):
        done = [i for i in order if delays[i] <= policy.seconds]
        if len(done) < policy.min_k:
            raise PolicyUnsatisfiable(
                f"{len(done)} workers finished by the {policy.seconds}s deadline, "
                f"need {policy.min_k}"
            )
        return done
    raise TypeError(f"unknown straggler policy {policy!r}")


# -- workers ----------------------------------------------------------------

def _warn_small(m: int, dim: int, mode: str) -> None:
    if m <= dim + 1:
        warnings.warn(
            f"sketch size m={m} <= {dim + 1}: the exact error formulas need m > {dim + 1} ({mode})",
            RuntimeWarning,
            stacklevel=3,
        )


def _left_once(spec, A, b, seed, lev):
    SA, Sb = draw(spec, A.shape[0], seed, lev).apply(A, b)
    return linalg.lstsq_solve(SA, Sb)


def _right_once(spec, A, b, seed, lev):
    S = draw(spec, A.shape[1], seed, lev)
    (SAt,) = S.apply(A.T)
    z = linalg.minnorm_solve(SAt.T, b)
    return S.apply_t(z)


def _solve_with_retries(once, spec, A, b, seed, lev, max_retries, index):
    t0 = time.perf_counter()
    for attempt in range(max_retries + 1):
        s = retry_seed(seed, attempt)
        try:
            x = once(spec, A, b, s, lev)
        except RankDeficient:
            log.debug("worker %d: singular sketch on attempt %d (seed %d)", index, attempt, s)
            continue
        return WorkerOutput(index, x, s, attempt, time.perf_counter() - t0)
    raise PersistentRankDeficiency(max_retries + 1, s)


def worker_solve_left(
    spec: SketchSpec,
    A,
    b,
    seed: int,
    *,
    lev=None,
    max_retries: int = DEFAULT_MAX_RETRIES,
    index: int = 0,
) -> WorkerOutput:
    """Solve ``argmin_x ||S A x - S b||^2`` for one sketch drawn from ``seed``.

    A rank-deficient sketched matrix is redrawn with a derived seed up to
    ``max_retries`` times, so the returned estimate is conditioned on
    ``A^T S^T S A`` being invertible.
    """
    A = as_matrix(A)
    n, d = A.shape
    b = as_vector(b, n)
    if n < d:
        raise ShapeMismatch(f"left sketch needs n >= d, got {n}x{d}")
    if spec.needs_leverage and lev is None:
        lev = linalg.leverage_scores(A)
    _warn_small(spec.m, d, "left sketch")
    return _solve_with_retries(_left_once, spec, A, b, seed, lev, max_retries, index)


def worker_solve_right(
    spec: SketchSpec,
    A,
    b,
    seed: int,
    *,
    lev=None,
    max_retries: int = DEFAULT_MAX_RETRIES,
    index: int = 0,
) -> WorkerOutput:
    """Minimum-norm solve in a sketched feature space: ``x = S^T z``.

    ``z`` is the minimum-norm solution of ``A S^T z = b``; the same draw of
    ``S`` is used for both steps. For leverage sketches ``lev`` holds the
    leverage scores of ``A^T``.
    """
    A = as_matrix(A)
    n, d = A.shape
    b = as_vector(b, n)
    if n > d:
        raise ShapeMismatch(f"right sketch needs n <= d, got {n}x{d}")
    if spec.needs_leverage and lev is None:
        lev = linalg.leverage_scores(A.T)
    _warn_small(spec.m, n, "right sketch")
    return _solve_with_retries(_right_once, spec, A, b, seed, lev, max_retries, index)


# -- master -----------------------------------------------------------------

class _KahanSum:
    """Compensated running sum of vectors."""

    def __init__(self, dim: int):
        self.total = np.zeros(dim)
        self._c = np.zeros(dim)
        self.count = 0

    def add(self, x: np.ndarray) -> None:
        y = x - self._c
        t = self.total + y
        self._c = (t - self.total) - y
        self.total = t
        self.count += 1

    def mean(self) -> np.ndarray:
        return self.total / self.count


def reference_solution(A, b, mode: Mode | str = Mode.LEFT) -> np.ndarray:
    """Exact ``x*``: least squares for left mode, minimum norm for right mode."""
    return linalg.lstsq_solve(A, b) if Mode(mode) is Mode.LEFT else linalg.minnorm_solve(A, b)


def optimal_value(A, b, x_star, mode: Mode | str = Mode.LEFT) -> float:
    """``f(x*)``: the residual cost (left) or the squared solution norm (right)."""
    if Mode(mode) is Mode.LEFT:
        return linalg.residual_cost(A, x_star, b)
    return float(x_star @ x_star)


def relative_error(A, b, x, x_star, f_star: float, mode: Mode | str = Mode.LEFT) -> float:
    """``(f(x) - f*)/f*`` for left mode, ``||x - x*||^2 / f*`` for right mode.

    Tiny negative values from rounding are clamped to zero; anything below
    ``-1e-12`` indicates a wrong ``x*`` and raises.
    """
    if not f_star > 0.0:
        raise ValueError("relative error is undefined when f(x*) = 0")
    if Mode(mode) is Mode.LEFT:
        err = (linalg.residual_cost(A, x, b) - f_star) / f_star
    else:
        diff = np.asarray(x) - x_star
        err = float(diff @ diff) / f_star
    if err < -1e-12:
        raise ArithmeticError(f"relative error {err} < 0: x* is not optimal")
    return max(err, 0.0)


def default_threads() -> int:
    env = os.environ.get("SKETCHAVG_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _worker_fn(mode: Mode):
    return worker_solve_left if mode is Mode.LEFT else worker_solve_right


def run_distributed(
    A,
    b,
    spec: SketchSpec,
    q: int,
    master_seed: int,
    mode: Mode | str = Mode.LEFT,
    policy: StragglerPolicy = WaitAll(),
    worker_delay_model=None,
    *,
    reproducible: bool = True,
    track_errors: bool = False,
    x_star=None,
    lev=None,
    max_retries: int = DEFAULT_MAX_RETRIES,
    max_workers: int | None = None,
) -> AveragedEstimate:
    """Run ``q`` sketch-and-solve workers and average their estimates.

    Worker ``k`` (1-based) uses seed ``splitmix64(master_seed + k)``.

    In reproducible mode (the default) arrivals are simulated from
    ``worker_delay_model`` (all zero when absent, so workers arrive in index
    order); only the workers admitted by ``policy`` are run, and the final
    sum is taken in worker-index order so the result is bit-identical across
    runs. With ``reproducible=False`` every worker gets its own thread,
    sleeps for its simulated delay, and is averaged in real arrival order;
    workers still pending once the policy is satisfied are cancelled.
    ``max_workers`` (default ``SKETCHAVG_THREADS`` or the CPU count) caps
    the thread pool used in reproducible mode.

    With ``track_errors`` the relative error of the running average is
    recorded after each arrival in ``prefix_errors`` as ``(j, error)``.
    """
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    mode = Mode(mode)
    A = as_matrix(A)
    b = as_vector(b, A.shape[0])
    dim = A.shape[1]
    if spec.needs_leverage and lev is None:
        lev = linalg.leverage_scores(A if mode is Mode.LEFT else A.T)
    f_star = None
    if track_errors:
        if x_star is None:
            x_star = reference_solution(A, b, mode)
        f_star = optimal_value(A, b, x_star, mode)
    threads = max_workers if max_workers is not None else default_threads()
    delays = (
        worker_delay_model.sample(q, master_seed)
        if worker_delay_model is not None
        else np.zeros(q)
    )
    solve = _worker_fn(mode)

    def job(k: int, sleep: float = 0.0) -> WorkerOutput:
        if sleep > 0:
            time.sleep(sleep)
        return solve(spec, A, b, worker_seed(master_seed, k), lev=lev, max_retries=max_retries, index=k)

    if reproducible:
        admitted = select_arrivals(delays, policy)
        if threads > 1 and len(admitted) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = dict(zip(admitted, pool.map(lambda i: job(i + 1), admitted)))
        else:
            results = {i: job(i + 1) for i in admitted}
        arrival = [results[i] for i in admitted]
        by_index = [results[i] for i in sorted(admitted)]
        wall = float(max(delays[i] for i in admitted))
    else:
        t0 = time.perf_counter()
        arrival = _run_live(job, q, delays, policy)
        by_index = arrival
        wall = time.perf_counter() - t0

    prefix = None
    if track_errors:
        prefix = []
        running = _KahanSum(dim)
        for j, w in enumerate(arrival, start=1):
            running.add(w.x_hat)
            prefix.append((j, relative_error(A, b, running.mean(), x_star, f_star, mode)))

    acc = _KahanSum(dim)
    for w in by_index:
        acc.add(w.x_hat)
    return AveragedEstimate(acc.mean(), acc.count, prefix, by_index, wall)


def _run_live(job, q, delays, policy) -> list[WorkerOutput]:
    need = q
    if isinstance(policy, FirstK):
        if policy.k > q:
            raise PolicyUnsatisfiable(f"FirstK({policy.k}) with only {q} workers")
        need = policy.k
    deadline = None
    if isinstance(policy, Deadline):
        deadline = time.monotonic() + policy.seconds
    arrived: list[WorkerOutput] = []
    # one thread per worker: simulated stragglers sleep rather than compute
    pool = ThreadPoolExecutor(max_workers=q)
    try:
        pending = {pool.submit(job, k, float(delays[k - 1])) for k in range(1, q + 1)}
        while pending and len(arrived) < need:
            timeout = None if deadline is None else max(0.0, deadline - time.monotonic())
            done, pending = wait(pending, timeout=timeout, return_when=FIRST_COMPLETED)
            if not done:
                break
            # ties within one wake-up are ordered by worker index
            for fut in sorted(done, key=lambda f: f.result().index):
                arrived.append(fut.result())
        for fut in pending:
            fut.cancel()
    finally:
        pool.shutdown(wait=False, cancel_futures=True)
    if isinstance(policy, Deadline) and len(arrived) < policy.min_k:
        raise PolicyUnsatisfiable(
            f"{len(arrived)} workers finished by the {policy.seconds}s deadline, need {policy.min_k}"
        )
    return arrived[:need]


# -- bias / variance decomposition -----------------------------------------

@dataclass
class ErrorDecomposition:
    """Monte-Carlo estimates of ``E f(x_bar) - f*`` and its two components.

    ``variance_term`` estimates ``(1/q) E||A x_1 - A x*||^2`` and
    ``bias_sq_term`` estimates ``((q-1)/q) ||E[A x_1] - A x*||^2``; the
    ``*_se`` fields are standard errors.
    """

    total: float
    variance_term: float
    bias_sq_term: float
    total_se: float
    variance_se: float
    bias_sq_se: float
    trials: int
    q: int
    retries: int

    def __iter__(self):
        return iter((self.total, self.variance_term, self.bias_sq_term))

    @property
    def combined_se(self) -> float:
        return math.sqrt(self.total_se**2 + self.variance_se**2 + self.bias_sq_se**2)


def decompose_error_mc(A, b, spec: SketchSpec, q: int, trials: int, master_seed: int, *, lev=None) -> ErrorDecomposition:
    """Estimate both sides of the bias-variance identity for averaged left sketches.

    Trial ``t`` runs :func:`run_distributed` with master seed
    ``splitmix64(master_seed + t)``. Every worker estimate is an independent
    draw of ``x_1``, so the variance and bias terms pool all ``trials * q``
    of them; the squared-mean estimate is debiased by its sampling variance.
    """
    if trials < 100:
        raise ValueError(f"decompose_error_mc needs trials >= 100, got {trials}")
    A = as_matrix(A)
    b = as_vector(b, A.shape[0])
    if spec.needs_leverage and lev is None:
        lev = linalg.leverage_scores(A)
    x_star = linalg.lstsq_solve(A, b)
    f_star = linalg.residual_cost(A, x_star, b)
    G = A.T @ A

    totals = np.empty(trials)
    devs = []
    retries = 0
    for t in range(trials):
        est = run_distributed(A, b, spec, q, splitmix64(master_seed + t), lev=lev, max_workers=1)
        totals[t] = linalg.residual_cost(A, est.x_bar, b) - f_star
        devs.extend(w.x_hat - x_star for w in est.workers)
        retries += est.retries
    V = np.asarray(devs)  # N x d deviations x_hat - x*
    N = V.shape[0]
    sq = np.einsum("ij,jk,ik->i", V, G, V)  # ||A v_i||^2

    mu = V.mean(axis=0)
    C = np.cov(V, rowvar=False).reshape(V.shape[1], V.shape[1])
    CG = C @ G
    mean_sq = float(mu @ G @ mu)
    bias_sq = mean_sq - float(np.trace(CG)) / N
    proj = V @ (G @ mu)  # <A v_i, A mu>
    var_bias = 4.0 * float(np.var(proj, ddof=1)) / N + 2.0 * float(np.trace(CG @ CG)) / N**2

    w_var, w_bias = 1.0 / q, (q - 1.0) / q
    return ErrorDecomposition(
        total=float(totals.mean()),
        variance_term=w_var * float(sq.mean()),
        bias_sq_term=w_bias * bias_sq,
        total_se=float(totals.std(ddof=1) / math.sqrt(trials)),
        variance_se=w_var * float(sq.std(ddof=1) / math.sqrt(N)),
        bias_sq_se=w_bias * math.sqrt(max(var_bias, 0.0)),
        trials=trials,
        q=q,
        retries=retries,
    )

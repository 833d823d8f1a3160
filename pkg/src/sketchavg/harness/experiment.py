"""Monte-Carlo experiment engine.

For every (sketch, q, trial) the engine runs one distributed solve and
writes a data row. Trial ``t`` uses master seed ``splitmix64(master_seed + t)``
for every sketch and every q, so curves over q share random numbers and the
q=1 worker of a trial is also the first worker of its q=100 run.

Data CSV columns (fixed order)::

    sketch, m, m_prime, s, q, trial, seed, q_used, relative_error,
    wall_time, retries, error

``wall_time`` is the simulated master wall time (the latest admitted
arrival under the delay model, 0 without one), which keeps the file
byte-identical across runs. ``error`` is empty on success and holds the
exception class name when the solve failed. The summary CSV aggregates
successful rows per (sketch, q); the optional prefix CSV traces the error
of the running average after each arrival.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import linalg, matio
from ..errors import SketchAvgError
from ..rng import splitmix64
from ..solver import (
    Mode,
    default_threads,
    optimal_value,
    reference_solution,
    relative_error,
    run_distributed,
)
from .config import ExperimentConfig
from .generate import generate

log = logging.getLogger(__name__)

DATA_COLUMNS = (
    "sketch", "m", "m_prime", "s", "q", "trial", "seed", "q_used",
    "relative_error", "wall_time", "retries", "error",
)
SUMMARY_COLUMNS = (
    "sketch", "m", "m_prime", "s", "q", "trials_ok", "trials_failed",
    "mean_relative_error", "se_relative_error", "mean_retries", "mean_worker_seconds",
)
PREFIX_COLUMNS = ("sketch", "m", "m_prime", "s", "q", "trial", "j", "relative_error")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def content_hash(A: np.ndarray, b: np.ndarray, mode: Mode) -> str:
    h = hashlib.sha256()
    h.update(mode.value.encode())
    h.update(np.asarray(A.shape, dtype="<u8").tobytes())
    h.update(np.ascontiguousarray(A, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return h.hexdigest()


def cached_reference(A, b, mode: Mode, cache_dir=None) -> np.ndarray:
    """Exact solution, cached in ``cache_dir`` as ``xstar-<hash>.dskm`` when given."""
    if cache_dir is None:
        return reference_solution(A, b, mode)
    path = Path(cache_dir) / f"xstar-{content_hash(A, b, mode)[:16]}.dskm"
    if path.exists():
        return matio.read_vector(path)
    x_star = reference_solution(A, b, mode)
    matio.write_dskm(path, x_star)
    return x_star


@dataclass
class Problem:
    A: np.ndarray
    b: np.ndarray
    mode: Mode
    x_star: np.ndarray
    f_star: float
    lev: np.ndarray | None = None


def load_problem(config: ExperimentConfig, base_dir=None) -> Problem:
    data = config.problem.data
    mode = config.problem.mode
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    if data.generator is not None:
        seed = data.seed if data.seed is not None else config.master_seed
        A, b, _ = generate(data.generator, seed)
        x_star = reference_solution(A, b, mode)
    else:
        a_path = base / data.A
        A = matio.read_matrix(a_path)
        b = matio.read_vector(base / data.b)
        x_star = cached_reference(A, b, mode, a_path.parent)
    lev = None
    if any(s.needs_leverage for s in config.sketches):
        lev = linalg.leverage_scores(A if mode is Mode.LEFT else A.T)
    return Problem(A, b, mode, x_star, optimal_value(A, b, x_star, mode), lev)


@dataclass
class ExperimentResult:
    rows: list[dict]
    summary: list[dict]
    prefix_rows: list[dict]
    data_path: Path
    summary_path: Path
    prefix_path: Path | None


def _key(spec) -> dict:
    s = spec.inner.s if spec.inner is not None else spec.s
    return {"sketch": spec.label(), "m": spec.m, "m_prime": spec.m_prime, "s": s}


def _run_one(problem: Problem, config: ExperimentConfig, spec, q: int, trial: int):
    seed = splitmix64(config.master_seed + trial)
    row = {**_key(spec), "q": q, "trial": trial, "seed": seed}
    t0 = time.perf_counter()
    try:
        est = run_distributed(
            problem.A, problem.b, spec, q, seed, problem.mode,
            policy=config.straggler,
            worker_delay_model=config.delay_model,
            track_errors=config.record_prefix_errors,
            x_star=problem.x_star,
            lev=problem.lev,
            max_workers=1,
        )
        err = relative_error(problem.A, problem.b, est.x_bar, problem.x_star, problem.f_star, problem.mode)
    except (SketchAvgError, ArithmeticError) as exc:
        log.warning("sketch %s q=%d trial %d failed: %s", spec.label(), q, trial, exc)
        row.update(q_used=0, relative_error=None, wall_time=None, retries=None, error=type(exc).__name__)
        return row, [], time.perf_counter() - t0
    row.update(q_used=est.q_used, relative_error=err, wall_time=est.wall_time, retries=est.retries, error="")
    prefix = []
    if est.prefix_errors:
        prefix = [{**_key(spec), "q": q, "trial": trial, "j": j, "relative_error": e} for j, e in est.prefix_errors]
    return row, prefix, time.perf_counter() - t0


def _summarize(rows: list[dict], seconds: list[float]) -> list[dict]:
    groups: dict[tuple, list[int]] = {}
    for i, r in enumerate(rows):
        groups.setdefault((r["sketch"], r["m"], r["m_prime"], r["s"], r["q"]), []).append(i)
    out = []
    for (sketch, m, m_prime, s, q), idx in groups.items():
        ok = [rows[i] for i in idx if not rows[i]["error"]]
        errs = np.array([r["relative_error"] for r in ok], dtype=float)
        se = float(errs.std(ddof=1) / math.sqrt(len(errs))) if len(errs) > 1 else None
        q_used = sum(r["q_used"] for r in ok) or 1
        out.append({
            "sketch": sketch, "m": m, "m_prime": m_prime, "s": s, "q": q,
            "trials_ok": len(ok),
            "trials_failed": len(idx) - len(ok),
            "mean_relative_error": float(errs.mean()) if len(errs) else None,
            "se_relative_error": se,
            "mean_retries": float(np.mean([r["retries"] for r in ok])) if ok else None,
            "mean_worker_seconds": sum(seconds[i] for i in idx) / q_used,
        })
    return out


def _write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def output_paths(data_path) -> tuple[Path, Path, Path]:
    p = Path(data_path)
    return p, p.with_name(p.stem + "_summary.csv"), p.with_name(p.stem + "_prefix.csv")


def run_experiment(config: ExperimentConfig, base_dir=None, max_workers: int | None = None) -> ExperimentResult:
    """Run the full sweep described by ``config`` and write its CSV files.

    Relative paths in the config (data files, outputs) resolve against
    ``base_dir`` (default: the current directory). Failed solves are
    recorded in the ``error`` column and the sweep continues.
    """
    problem = load_problem(config, base_dir)
    tasks = [(spec, q, t) for spec in config.sketches for q in config.q_grid for t in range(config.trials)]
    threads = max_workers if max_workers is not None else default_threads()
    log.info("running %d solves on %d thread(s)", len(tasks), threads)

    def task(args):
        return _run_one(problem, config, *args)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(task, tasks))
    else:
        results = [task(t) for t in tasks]

    rows = [r for r, _, _ in results]
    prefix_rows = [p for _, ps, _ in results for p in ps]
    seconds = [s for _, _, s in results]
    summary = _summarize(rows, seconds)

    base = Path(base_dir) if base_dir is not None else Path.cwd()
    data_path, summary_path, prefix_path = output_paths(base / config.outputs)
    data_path.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(data_path, DATA_COLUMNS, rows)
    _write_csv(summary_path, SUMMARY_COLUMNS, summary)
    if config.record_prefix_errors:
        _write_csv(prefix_path, PREFIX_COLUMNS, prefix_rows)
    else:
        prefix_path = None
    return ExperimentResult(rows, summary, prefix_rows, data_path, summary_path, prefix_path)

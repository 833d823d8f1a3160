"""End-to-end acceptance criteria, one test per numbered criterion.

Each test stores a one-line summary with ``record_property("detail", ...)``
before asserting; ``conftest.py`` prints a PASS/FAIL line per criterion at
the end of the run.
"""

import json
import math

import numpy as np
import pytest

from oracles import private_size_exact, sylvester
from sketchavg import FirstK, SketchSpec, WaitAll, decompose_error_mc, linalg, materialize, privacy, run_distributed
from sketchavg.harness.cli import main
from sketchavg.harness.config import ExperimentConfig
from sketchavg.harness.experiment import run_experiment
from sketchavg.privacy import PrivacyParams
from sketchavg.rng import generator, splitmix64
from sketchavg.solver import optimal_value, reference_solution, relative_error

acceptance = pytest.mark.acceptance


def planted(n, d, seed, noise=1.0):
    g = generator(seed)
    A = g.standard_normal((n, d))
    return A, A @ g.standard_normal(d) + noise * g.standard_normal(n)


def errors(A, b, spec, q, trials, base, mode="left"):
    x_star = reference_solution(A, b, mode)
    f_star = optimal_value(A, b, x_star, mode)
    out = np.empty(trials)
    for t in range(trials):
        est = run_distributed(A, b, spec, q, splitmix64(base + t), mode, max_workers=1)
        out[t] = relative_error(A, b, est.x_bar, x_star, f_star, mode)
    return out


def mean_se(e):
    return float(e.mean()), float(e.std(ddof=1) / math.sqrt(len(e)))


@acceptance(criterion=1, title="single Gaussian sketch error d/(m-d-1)")
def test_ac01_single_sketch_exact_rate(record_property):
    A, b = planted(500, 10, 1)
    expected = 10 / (50 - 10 - 1)
    mean, se = mean_se(errors(A, b, SketchSpec("gaussian", 50), 1, 2000, 1000))
    ok = abs(mean - expected) <= 0.10 * expected and abs(mean - expected) <= 3 * se
    record_property("detail", f"mean={mean:.5f} se={se:.5f} expected={expected:.5f}")
    assert ok


@acceptance(criterion=2, title="averaged error scales as 1/q")
def test_ac02_averaging_rate(record_property):
    A, b = planted(500, 10, 1)
    spec = SketchSpec("gaussian", 50)
    base_rate = 10 / 39
    qs = [1, 4, 16, 64]
    means, parts = [], []
    ok = True
    for q in qs:
        mean, se = mean_se(errors(A, b, spec, q, 500, 10_000 * q))
        expected = base_rate / q
        ok &= abs(mean - expected) <= max(0.15 * expected, 3 * se)
        means.append(mean)
        parts.append(f"q={q}:{mean:.5f}/{expected:.5f}")
    slope = float(np.polyfit(np.log(qs), np.log(means), 1)[0])
    ok &= -1.15 <= slope <= -0.85
    record_property("detail", " ".join(parts) + f" slope={slope:.3f}")
    assert ok


@acceptance(criterion=3, title="right sketch error (d-n)/(m-n-1)")
def test_ac03_right_sketch(record_property):
    g = generator(3)
    A, b = g.standard_normal((50, 1000)), g.standard_normal(50)
    spec = SketchSpec("gaussian", 200)
    expected = 950 / 149
    m1, _ = mean_se(errors(A, b, spec, 1, 1000, 0, "right"))
    m25, _ = mean_se(errors(A, b, spec, 25, 100, 50_000, "right"))
    ok = abs(m1 - expected) <= 0.10 * expected and abs(m25 - expected / 25) <= 0.15 * expected / 25
    record_property("detail", f"q=1 mean={m1:.4f} (expected {expected:.4f}); q=25 mean={m25:.5f} (expected {expected / 25:.5f})")
    assert ok


@acceptance(criterion=4, title="bias/variance split: Gaussian unbiased, uniform biased")
def test_ac04_unbiasedness_split(record_property):
    A, b = planted(200, 5, 4)
    gauss = decompose_error_mc(A, b, SketchSpec("gaussian", 30), 10, 5000, 1)
    # one high-leverage row whose target disagrees with the rest
    Ac, bc = A.copy(), b.copy()
    Ac[0] *= 30.0
    bc[0] += 150.0
    unif = decompose_error_mc(Ac, bc, SketchSpec("uniform_with", 30), 10, 1000, 2)
    ok = gauss.bias_sq_term < 0.05 * gauss.variance_term and unif.bias_sq_term > 3 * unif.bias_sq_se
    record_property(
        "detail",
        f"gaussian bias^2={gauss.bias_sq_term:.3g} var={gauss.variance_term:.3g}; "
        f"uniform bias^2={unif.bias_sq_term:.4g} ({unif.bias_sq_term / unif.bias_sq_se:.1f} SE)",
    )
    assert ok


@acceptance(criterion=5, title="error-vs-q curves: Gaussian/ROS decay, uniform floors")
def test_ac05_curves(record_property, tmp_path):
    cfg = ExperimentConfig.from_dict({
        "problem": {"mode": "left", "data": {
            "generator": {"n": 1022, "d": 41, "distribution": "student_t", "df": 1.5, "noise_std": 0.1},
            "seed": 3}},
        "sketches": [{"kind": "gaussian", "m": 100}, {"kind": "ros", "m": 100}, {"kind": "uniform_without", "m": 100}],
        "q_grid": [1, 100],
        "trials": 200,
        "master_seed": 11,
        "outputs": "curves.csv",
    })
    result = run_experiment(cfg, base_dir=tmp_path, max_workers=1)
    mean = {(s["sketch"], s["q"]): s["mean_relative_error"] for s in result.summary}
    g_ratio = mean["gaussian", 100] / mean["gaussian", 1]
    r_ratio = mean["ros", 100] / mean["ros", 1]
    floor = mean["uniform_without", 100] / mean["gaussian", 100]
    failed = sum(s["trials_failed"] for s in result.summary)
    ok = g_ratio <= 1 / 20 and r_ratio <= 1 / 20 and floor >= 5 and failed == 0
    record_property(
        "detail",
        f"gaussian q100/q1={g_ratio:.4f} ros q100/q1={r_ratio:.4f} uniform/gaussian at q100={floor:.1f}",
    )
    assert ok


ISOTROPY_SPECS = [
    SketchSpec("gaussian", 4),
    SketchSpec("ros", 4),
    SketchSpec("uniform_with", 4),
    SketchSpec("uniform_without", 4),
    SketchSpec("leverage", 4),
    SketchSpec("sjlt", 4, s=2),
    SketchSpec.hybrid(4, 6, "gaussian"),
]


@acceptance(criterion=6, title="isotropy E[S^T S] = I for all sketch kinds")
def test_ac06_isotropy(record_property):
    n, draws = 8, 20_000
    lev = linalg.leverage_scores(generator(6).standard_normal((n, 3)))
    devs = {}
    for spec in ISOTROPY_SPECS:
        acc = np.zeros((n, n))
        for t in range(draws):
            S = materialize(spec, n, splitmix64(t), lev)
            acc += S.T @ S
        devs[spec.label()] = float(np.max(np.abs(acc / draws - np.eye(n))))
    worst = max(devs.values())
    record_property("detail", "max dev " + " ".join(f"{k}={v:.4f}" for k, v in devs.items()))
    assert worst <= 0.05


@acceptance(criterion=7, title="full uniform sample is exact")
def test_ac07_degenerate_exactness(record_property):
    A, b = planted(60, 4, 7)
    W, c = generator(8).standard_normal((4, 60)), generator(9).standard_normal(4)
    x_l, x_r = linalg.lstsq_solve(A, b), linalg.minnorm_solve(W, c)
    worst = 0.0
    for q in (1, 3, 8):
        left = run_distributed(A, b, SketchSpec("uniform_without", 60), q, q)
        right = run_distributed(W, c, SketchSpec("uniform_without", 60), q, q, "right")
        worst = max(worst, np.linalg.norm(left.x_bar - x_l) / np.linalg.norm(x_l),
                    np.linalg.norm(right.x_bar - x_r) / np.linalg.norm(x_r))
    record_property("detail", f"worst relative deviation {worst:.2e}")
    assert worst <= 1e-10


@acceptance(criterion=8, title="private sketch size, monotonicity, round trip")
def test_ac08_privacy(record_property):
    base = dict(n=10000, d=10, B0=1.0, sigma0=1.0, eps=1.0, beta=3.0)
    m1 = privacy.max_private_sketch_size(PrivacyParams(**base))
    m10 = privacy.max_private_sketch_size(PrivacyParams(**base, q=10))
    exact = private_size_exact(10000, 10, 1, 1, 1, 3)
    ok = m1 == 23017 == math.floor(exact) and m10 == 2301 == math.floor(exact / 10)

    eps_grid, n_grid, q_grid = [0.5, 1, 2, 4, 8], [5000, 10000, 20000, 40000, 80000], [1, 2, 5]
    size = {
        (e, n, q): privacy.max_private_sketch_size(PrivacyParams(**{**base, "eps": e, "n": n}, q=q))
        for e in eps_grid for n in n_grid for q in q_grid
    }
    mono = all(
        size[e, n, q] <= size[e2, n, q] for e, e2 in zip(eps_grid, eps_grid[1:]) for n in n_grid for q in q_grid
    ) and all(
        size[e, n, q] <= size[e, n2, q] for n, n2 in zip(n_grid, n_grid[1:]) for e in eps_grid for q in q_grid
    ) and all(
        size[e, n, q] >= size[e, n, q2] for q, q2 in zip(q_grid, q_grid[1:]) for e in eps_grid for n in n_grid
    )
    slack = max(
        privacy.theorem3_w(math.sqrt(10), m * q, e, privacy.delta_of(3.0)) - math.sqrt(n)
        for (e, n, q), m in size.items()
    )
    ok &= mono and slack <= 1e-6
    record_property("detail", f"m(q=1)={m1} m(q=10)={m10} monotone={mono} max w - sigma0*sqrt(n)={slack:.3g}")
    assert ok


@acceptance(criterion=9, title="Hadamard involution and leverage sum")
def test_ac09_fwht_leverage(record_property):
    worst_h = 0.0
    for n in (2, 8, 64):
        H = linalg.fwht(np.eye(n))
        assert np.array_equal(H, sylvester(n))
        worst_h = max(worst_h, np.max(np.abs(H @ H - n * np.eye(n))) / n)
    g = generator(9)
    worst_l = 0.0
    for _ in range(50):
        n = int(g.integers(10, 200))
        d = int(g.integers(1, 10))
        worst_l = max(worst_l, abs(linalg.leverage_scores(g.standard_normal((n, d))).sum() - d))
    record_property("detail", f"max |H^2 - nI|/n={worst_h:.1e} max |sum lev - d|={worst_l:.1e}")
    assert worst_h <= 1e-12 and worst_l <= 1e-8


@acceptance(criterion=10, title="deterministic experiment output and FirstK(q) = WaitAll")
def test_ac10_determinism(record_property, tmp_path, capsys):
    cfg = {
        "problem": {"mode": "left", "data": {"generator": {"n": 300, "d": 6, "distribution": "student_t", "df": 2.0}}},
        "sketches": [{"kind": k, "m": 30} for k in ("gaussian", "ros", "uniform_with", "leverage")]
        + [{"kind": "sjlt", "m": 30, "s": 3}, {"kind": "hybrid", "m": 30, "m_prime": 90, "inner": {"kind": "gaussian"}}],
        "q_grid": [1, 5],
        "trials": 4,
        "master_seed": 21,
        "outputs": "det.csv",
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["experiment", "--config", str(path), "--threads", "1"]) == 0
    first = (tmp_path / "det.csv").read_bytes()
    assert main(["experiment", "--config", str(path), "--threads", "3"]) == 0
    same_csv = (tmp_path / "det.csv").read_bytes() == first
    capsys.readouterr()

    A, b = planted(200, 5, 10)
    same_x = all(
        np.array_equal(
            run_distributed(A, b, SketchSpec(kind, 30), q, 99, policy=WaitAll()).x_bar,
            run_distributed(A, b, SketchSpec(kind, 30), q, 99, policy=FirstK(q)).x_bar,
        )
        for kind in ("gaussian", "ros", "uniform_without")
        for q in (1, 4, 9)
    )
    record_property("detail", f"byte-identical CSV={same_csv} FirstK(q)==WaitAll={same_x}")
    assert same_csv and same_x

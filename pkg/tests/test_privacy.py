import math

import numpy as np
import pytest

from oracles import private_size_exact, w_squared
from sketchavg import privacy
from sketchavg.errors import (
    ConditionUnsatisfied,
    InvalidBeta,
    InvalidDelta,
    PrivacyUnsupported,
    SketchTooSmall,
)
from sketchavg.privacy import PrivacyParams
from sketchavg.rng import generator

BASE = dict(n=10000, d=10, B0=1.0, sigma0=1.0, eps=1.0, beta=3.0)


def test_delta_examples():
    assert privacy.delta_of(3.0) == pytest.approx(4 * math.exp(-3), rel=1e-15)
    assert privacy.delta_of(3.0) == pytest.approx(0.19914827, rel=1e-7)
    near = privacy.delta_of(math.log(4) + 1 + 1e-9)
    assert near < 1 / math.e and near == pytest.approx(1 / math.e, rel=1e-8)
    with pytest.raises(InvalidBeta):
        privacy.delta_of(math.log(4))


@pytest.mark.parametrize("beta", np.linspace(privacy.BETA_MIN + 1e-9, 40, 25))
def test_delta_below_one_over_e(beta):
    assert privacy.delta_of(beta) < 1 / math.e


def test_condition_examples():
    assert privacy.check_condition(PrivacyParams(**BASE))
    assert not privacy.check_condition(PrivacyParams(**{**BASE, "n": 80}))
    assert not privacy.check_condition(PrivacyParams(**{**BASE, "B0": 1e6}))


def test_reference_sizes():
    exact = private_size_exact(10000, 10, 1, 1, 1, 3)
    assert exact == pytest.approx((999 * 0.75 - 6) ** 2 / 24)
    assert math.floor(exact) == 23017
    assert privacy.max_private_sketch_size(PrivacyParams(**BASE)) == 23017
    assert privacy.max_private_sketch_size(PrivacyParams(**BASE, q=10)) == 2301


def test_too_many_workers():
    with pytest.raises(SketchTooSmall):
        privacy.max_private_sketch_size(PrivacyParams(**BASE, q=3000))


def test_condition_failure_raises():
    with pytest.raises(ConditionUnsatisfied):
        privacy.max_private_sketch_size(PrivacyParams(**{**BASE, "n": 80}))


@pytest.mark.parametrize("kind", ["ros", "sjlt", "hybrid", "uniform_with"])
def test_non_gaussian_rejected(kind):
    with pytest.raises(PrivacyUnsupported):
        privacy.max_private_sketch_size(PrivacyParams(**BASE), kind)


def test_params_validation():
    with pytest.raises(InvalidBeta):
        PrivacyParams(**{**BASE, "beta": 2.0})
    with pytest.raises(ValueError):
        PrivacyParams(**{**BASE, "eps": 0.0})
    with pytest.raises(ValueError):
        PrivacyParams(**{**BASE, "sigma0": -1.0})


def test_w_examples():
    eps, delta = 1.0, privacy.delta_of(3.0)
    L = math.log(4 / delta)
    # vanishing sketch: only the constant term survives
    assert privacy.theorem3_w(2.0, 1e-12, eps, delta) ** 2 == pytest.approx(
        4.0 * (1 + (1 + eps / L) / eps * 2 * L), rel=1e-6
    )
    for m in (1, 10, 1000, 23017):
        assert privacy.theorem3_w(1.5, m, eps, delta) ** 2 == pytest.approx(w_squared(1.5, m, eps, delta), rel=1e-13)
        assert privacy.theorem3_w(1.5, 2 * m, eps, delta) > privacy.theorem3_w(1.5, m, eps, delta)
    with pytest.raises(InvalidDelta):
        privacy.theorem3_w(1.0, 10, 1.0, 0.5)


def test_round_trip_with_row_norm_bound():
    # rows of A have d entries bounded by B0, so ||row|| <= B0 sqrt(d)
    p = PrivacyParams(**BASE)
    m = privacy.max_private_sketch_size(p)
    w = privacy.theorem3_w(p.B0 * math.sqrt(p.d), m * p.q, p.eps, p.delta)
    assert w <= p.sigma0 * math.sqrt(p.n) + 1e-6
    # the real-valued size is the exact inversion of the threshold
    w_edge = privacy.theorem3_w(p.B0 * math.sqrt(p.d), privacy.sketch_size_bound(p), p.eps, p.delta)
    assert w_edge == pytest.approx(p.sigma0 * math.sqrt(p.n), rel=1e-12)


def test_round_trip_over_grid():
    for n in (2000, 10000, 50000):
        for eps in (0.5, 1.0, 3.0):
            for q in (1, 4):
                p = PrivacyParams(n, 10, 1.0, 1.0, eps, 3.0, q)
                try:
                    m = privacy.max_private_sketch_size(p)
                except (ConditionUnsatisfied, SketchTooSmall):
                    continue
                w = privacy.theorem3_w(math.sqrt(p.d), m * q, eps, p.delta)
                assert w <= math.sqrt(n) + 1e-6


GRID_EPS = [0.5, 1.0, 2.0, 4.0, 8.0]
GRID_N = [5000, 10000, 20000, 40000, 80000]
GRID_Q = [1, 2, 5]


def _size(**kw):
    return privacy.max_private_sketch_size(PrivacyParams(**{**BASE, **kw}))


def test_monotone_in_eps_n_q():
    for q in GRID_Q:
        for n in GRID_N:
            sizes = [_size(n=n, eps=e, q=q) for e in GRID_EPS]
            assert sizes == sorted(sizes)
        for e in GRID_EPS:
            sizes = [_size(n=n, eps=e, q=q) for n in GRID_N]
            assert sizes == sorted(sizes)
    for n in GRID_N:
        for e in GRID_EPS:
            sizes = [_size(n=n, eps=e, q=q) for q in GRID_Q]
            assert sizes == sorted(sizes, reverse=True)


def test_monotone_in_sigma0_and_b0():
    s = [_size(sigma0=v) for v in (0.8, 1.0, 1.5, 2.0)]
    assert s == sorted(s)
    s = [_size(B0=v) for v in (0.5, 0.8, 1.0, 1.2)]
    assert s == sorted(s, reverse=True)


def test_params_from_matrix():
    g = generator(9)
    A = np.clip(g.standard_normal((500, 4)), -2, 2)
    b = np.clip(g.standard_normal(500), -2, 2)
    Ac = np.column_stack([A, b])
    p = privacy.params_from_matrix(Ac, 1.0, 3.0)
    assert (p.n, p.d) == (500, 4)
    assert p.B0 == np.abs(Ac).max()
    assert p.sigma0 == pytest.approx(np.linalg.svd(Ac, compute_uv=False).min() / math.sqrt(500))
    r = privacy.params_from_matrix(g.standard_normal((5, 300)), 1.0, 3.0, mode="right")
    assert (r.n, r.d) == (300, 5)

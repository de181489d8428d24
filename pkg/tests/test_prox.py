import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from gradslide.core import ConfigurationError, DomainError, OracleTally
from gradslide.prox import (ProxSetup, ball, box, bregman, composite_prox, entropy_simplex, euclidean,
                            euclidean_simplex, project_simplex, three_point_check)

SETUPS = {
    "rn": lambda n: euclidean(n),
    "box": lambda n: box(-1.0, 0.5, n),
    "ball": lambda n: ball(np.full(n, 0.2), 1.3),
    "esimplex": lambda n: euclidean_simplex(n),
    "entropy": lambda n: entropy_simplex(n),
}


def _interior(setup, rng):
    x = setup.random_point(rng, 2.0)
    if not setup.is_euclidean:
        x = 0.9 * x + 0.1 / setup.dim
    return x


def test_bregman_euclidean_example():
    assert bregman(euclidean(2), np.zeros(2), np.array([3.0, 4.0])) == 12.5


def test_bregman_identity_is_zero():
    x = np.array([0.2, 0.3, 0.5])
    assert bregman(entropy_simplex(3), x, x) == pytest.approx(0.0, abs=1e-16)
    assert bregman(euclidean(3), x, x) == 0.0


def test_bregman_entropy_kl_example():
    # reference value from scipy.stats.entropy([.75, .25], [.5, .5])
    v = bregman(entropy_simplex(2), np.array([0.5, 0.5]), np.array([0.75, 0.25]))
    assert v == pytest.approx(0.13081203594113697, rel=1e-13)


def test_bregman_entropy_rejects_boundary_anchor():
    with pytest.raises(DomainError):
        bregman(entropy_simplex(2), np.array([1.0, 0.0]), np.array([0.5, 0.5]))


def test_euclidean_two_anchor_example():
    # dense grid search (step 1e-3) gives (0.75, 1.0)
    t = OracleTally()
    x = composite_prox(euclidean(2), np.array([1.0, 0.0]), np.zeros(2), 2.0, np.array([2.0, 2.0]), 2.0, t)
    np.testing.assert_allclose(x, [0.75, 1.0], rtol=0, atol=1e-15)
    assert t.prox_calls == 1


def test_box_single_anchor_is_projection():
    s = box(0.0, 1.0, 3)
    a = np.array([0.5, 0.9, 0.1])
    lin = np.array([-2.0, -0.05, 1.0])
    x = composite_prox(s, lin, a, 2.0, np.full(3, 99.0), 0.0)
    np.testing.assert_allclose(x, np.clip(a - lin / 2.0, 0, 1))


def test_entropy_single_anchor_closed_form():
    a = np.array([0.2, 0.3, 0.5])
    lin = np.array([0.4, -1.0, 0.3])
    x = composite_prox(entropy_simplex(3), lin, a, 1.5, a, 0.0)
    ref = a * np.exp(-lin / 1.5)
    np.testing.assert_allclose(x, ref / ref.sum(), rtol=1e-14)


def test_prox_weight_errors():
    with pytest.raises(DomainError):
        composite_prox(euclidean(2), np.zeros(2), np.zeros(2), 0.0, np.zeros(2), 0.0)
    with pytest.raises(DomainError):
        composite_prox(euclidean(2), np.zeros(2), np.zeros(2), -1.0, np.zeros(2), 1.0)
    with pytest.raises(DomainError):
        composite_prox(entropy_simplex(2), np.zeros(2), np.array([1.0, 0.0]), 1.0, np.full(2, .5), 1.0)


def test_unsupported_combination():
    with pytest.raises(ConfigurationError):
        ProxSetup("entropy-l1-simplex", "box", 2, lo=np.zeros(2), hi=np.ones(2))
    with pytest.raises(ConfigurationError):
        ProxSetup("manhattan", "rn", 2)


def test_entropy_prox_survives_extreme_linear_terms():
    x = composite_prox(entropy_simplex(3), np.array([0.0, 1e6, -1e6]), np.full(3, 1 / 3), 1.0,
                       np.full(3, 1 / 3), 1.0)
    assert np.all(x > 0) and abs(x.sum() - 1) <= 1e-12


def test_three_point_identity_probe():
    s = euclidean(3)
    rng = np.random.default_rng(1)
    lin, a1, a2 = rng.normal(size=(3, 3))
    u = composite_prox(s, lin, a1, 1.0, a2, 2.0)
    assert three_point_check(s, lin, a1, 1.0, a2, 2.0, u) == pytest.approx(0.0, abs=1e-14)


def test_three_point_is_equality_on_rn():
    s = euclidean(5)
    rng = np.random.default_rng(2)
    for _ in range(100):
        lin, a1, a2, probe = rng.normal(size=(4, 5))
        slack = three_point_check(s, lin, a1, rng.uniform(0.1, 3), a2, rng.uniform(0.1, 3), probe)
        assert abs(slack) <= 1e-10


def test_three_point_box_boundary_solution():
    s = box(0.0, 1.0, 2)
    lin = np.array([10.0, -10.0])
    u = composite_prox(s, lin, np.full(2, 0.5), 1.0, np.full(2, 0.5), 1.0)
    np.testing.assert_array_equal(u, [0.0, 1.0])
    slack = three_point_check(s, lin, np.full(2, 0.5), 1.0, np.full(2, 0.5), 1.0, np.array([0.3, 0.6]))
    assert slack >= 0.0


def test_project_simplex_matches_sort_free_reference():
    rng = np.random.default_rng(3)
    for _ in range(200):
        y = rng.normal(size=6) * 3
        x = project_simplex(y)
        # KKT: x = max(y - tau, 0) with sum 1, tau found by bisection
        lo, hi = y.min() - 1, y.max()
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if np.maximum(y - mid, 0).sum() > 1 else (lo, mid)
        np.testing.assert_allclose(x, np.maximum(y - lo, 0), atol=1e-12)


@pytest.mark.parametrize("name", list(SETUPS))
def test_prox_output_feasible(name):
    rng = np.random.default_rng(4)
    s = SETUPS[name](4)
    for _ in range(300):
        a1, a2 = _interior(s, rng), _interior(s, rng)
        x = composite_prox(s, rng.normal(size=4) * 5, a1, rng.uniform(0, 3), a2, rng.uniform(0.01, 3))
        assert s.contains(x, tol=1e-12)
        if s.region == "simplex":
            assert np.all(x >= 0) and abs(x.sum() - 1) <= 1e-12


@pytest.mark.parametrize("name", list(SETUPS))
def test_bregman_strong_convexity(name):
    rng = np.random.default_rng(5)
    s = SETUPS[name](5)
    for _ in range(1000):
        x, z = _interior(s, rng), _interior(s, rng)
        assert bregman(s, x, z) >= 0.5 * s.sq_norm(z - x) - 1e-12


@settings(max_examples=200, deadline=None)
@given(lin=arrays(float, 3, elements=st.floats(-50, 50)),
       w1=st.floats(0.0, 10.0), w2=st.floats(1e-3, 10.0),
       seed=st.integers(0, 2**31 - 1), name=st.sampled_from(list(SETUPS)))
def test_three_point_property(lin, w1, w2, seed, name):
    rng = np.random.default_rng(seed)
    s = SETUPS[name](3)
    a1, a2, probe = _interior(s, rng), _interior(s, rng), _interior(s, rng)
    assert three_point_check(s, lin, a1, w1, a2, w2, probe) >= -1e-10 * max(1.0, np.abs(lin).sum())

import numpy as np
import pytest

from imftbounds.errors import NonFinite
from imftbounds.linalg import NormSpec
from imftbounds.oracle import (ANALYTIC, SAMPLED, BallPair, MapOracle, ball_points, fd_jacobian,
                               sampled_hess_bound)


def _cubic():
    return MapOracle.single(lambda x: np.array([x[0] ** 3 + x[1], x[1] - x[0] ** 2]), 2, name="cubic")


def test_fd_jacobian_matches_analytic():
    f = lambda x: np.array([np.sin(x[0]) * x[1], x[0] ** 2])
    x = np.array([0.3, -1.2])
    J = np.array([[np.cos(x[0]) * x[1], np.sin(x[0])], [2 * x[0], 0.0]])
    assert np.allclose(fd_jacobian(f, x), J, rtol=1e-6, atol=1e-8)


def test_ball_points_inside():
    pts = ball_points(np.zeros(3), 0.5, 200, NormSpec.INF, seed=1)
    assert pts.shape == (200, 3)
    assert np.all(np.max(np.abs(pts), axis=1) <= 0.5 + 1e-15)
    pts2 = ball_points(np.zeros(3), 0.5, 200, NormSpec.TWO, seed=1)
    assert np.all(np.linalg.norm(pts2, axis=1) <= 0.5 + 1e-12)


def test_ball_points_deterministic():
    a = ball_points(np.zeros(2), 1.0, 50, seed=7)
    b = ball_points(np.zeros(2), 1.0, 50, seed=7)
    assert np.array_equal(a, b)


def test_sampled_hessian_flagged_and_monotone():
    o = _cubic()
    small = o.hess_bound(BallPair([0.0, 0.0], [], 0.1, 0.1), "xx")
    big = o.hess_bound(BallPair([0.0, 0.0], [], 1.0, 1.0), "xx")
    assert small.provenance == SAMPLED and not small.certified
    assert big.value >= small.value
    # true sup of |6 x| over the unit box is 6
    assert big.value >= 6.0 * 0.9


def test_provider_is_analytic():
    o = MapOracle.single(lambda x: x ** 2, 1, jac=lambda x: np.diag(2 * x), hess_provider=lambda b, w, n: 2.0)
    b = o.hess_bound(BallPair([0.0], [], 1.0, 1.0), "xx")
    assert b.value == 2.0 and b.provenance == ANALYTIC
    assert o.jacobian_provenance == ANALYTIC
    assert _cubic().jacobian_provenance == "fd"


def test_nonfinite_raises():
    o = MapOracle.single(lambda x: np.array([np.nan]), 1)
    with pytest.raises(NonFinite):
        o.eval([0.0])


def test_hessian_fd_against_exact():
    o = _cubic()
    T = o.hess_tensor([0.5, 0.2], None, "xx")
    exact = np.zeros((2, 2, 2))
    exact[0, 0, 0] = 3.0
    exact[1, 0, 0] = -2.0
    assert np.allclose(T, exact, atol=1e-4)


def test_sample_count_validation():
    with pytest.raises(ValueError):
        sampled_hess_bound(_cubic(), BallPair([0.0, 0.0], [], 1.0, 1.0), "xx", samples=0)

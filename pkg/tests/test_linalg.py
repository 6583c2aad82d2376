import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from imftbounds.errors import NoStabilizingSolution, NotHurwitz, Singular
from imftbounds.linalg import (NormSpec, are_residual, bilinear_norm, halfvec, inverse, is_hurwitz,
                               lyapunov_inverse_norm, lyapunov_operator, op_norm, perturb_invert_margin,
                               solve_are, solve_linear, solve_lyapunov, unhalfvec, vec_norm)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_op_norms_small():
    M = np.array([[1.0, -2.0], [3.0, 4.0]])
    assert op_norm(M, NormSpec.INF) == 7.0
    assert op_norm(M, NormSpec.TWO) == pytest.approx(np.linalg.svd(M, compute_uv=False)[0])
    assert vec_norm([3, -4], NormSpec.TWO) == 5.0


@settings(max_examples=60, deadline=None)
@given(arrays(float, (3, 3), elements=finite), arrays(float, 3, elements=finite))
def test_op_norm_dominates_ratio(M, v):
    for norm in NormSpec:
        if vec_norm(v, norm) > 0:
            assert vec_norm(M @ v, norm) <= op_norm(M, norm) * vec_norm(v, norm) * (1 + 1e-12) + 1e-12


def test_bilinear_exact_vs_sampled(rng):
    T = rng.standard_normal((2, 3, 3))
    exact = bilinear_norm(T, NormSpec.INF)
    best = 0.0
    for s in itertools.product((-1, 1), repeat=3):
        for t in itertools.product((-1, 1), repeat=3):
            best = max(best, np.max(np.abs(np.einsum("iab,a,b->i", T, s, t))))
    assert exact == pytest.approx(best)
    assert bilinear_norm(T, NormSpec.INF, max_exact=0) >= exact


def test_solve_linear_and_singular():
    M = np.array([[2.0, 1.0], [1.0, 3.0]])
    x = solve_linear(M, [1.0, 2.0])
    assert np.allclose(M @ x, [1.0, 2.0], atol=1e-14)
    with pytest.raises(Singular):
        solve_linear(np.array([[1.0, 2.0], [2.0, 4.0]]), [1.0, 0.0])


def test_perturb_margin_is_inverse_norm():
    M = np.diag([2.0, 4.0])
    assert perturb_invert_margin(M) == pytest.approx(2.0)
    # a perturbation just inside the margin keeps M invertible
    inverse(M - 1.999 * np.eye(2))


def test_halfvec_roundtrip(rng):
    S = rng.standard_normal((4, 4))
    S = S + S.T
    assert np.array_equal(unhalfvec(halfvec(S), 4), S)


def test_lyapunov_roundtrip(rng):
    for _ in range(20):
        n = int(rng.integers(1, 6))
        A = rng.standard_normal((n, n)) - (n + 2) * np.eye(n)
        V = rng.standard_normal((n, n))
        V = V + V.T
        mu = solve_lyapunov(A, V)
        assert np.max(np.abs(lyapunov_operator(A, mu) - V)) <= 1e-8


def test_lyapunov_inverse_norm_values():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    P = solve_are(A, np.array([[0.0], [1.0]]), np.eye(2), np.eye(1))
    Ac = A - np.array([[0.0], [1.0]]) @ np.array([[0.0, 1.0]]) @ P
    assert lyapunov_inverse_norm(Ac) == pytest.approx(3.0207, abs=1e-3)
    assert lyapunov_inverse_norm(-np.eye(1)) == pytest.approx(0.5)
    assert lyapunov_inverse_norm(-np.eye(2), out="max") == pytest.approx(0.5)
    with pytest.raises(NotHurwitz):
        lyapunov_inverse_norm(np.eye(2))


def test_trace_vertex_bound_below_overapprox(rng):
    from imftbounds import linalg

    for _ in range(5):
        A = rng.standard_normal((2, 2)) - 3 * np.eye(2)
        exact = lyapunov_inverse_norm(A)
        old = linalg.VERTEX_MAX_ORDER
        linalg.VERTEX_MAX_ORDER = 0
        try:
            over = lyapunov_inverse_norm(A)
        finally:
            linalg.VERTEX_MAX_ORDER = old
        assert exact <= over * (1 + 1e-12)


def test_are_examples():
    P = solve_are(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0], [1.0]]), np.eye(2), np.eye(1))
    s3 = np.sqrt(3.0)
    assert np.allclose(P, [[s3, 1.0], [1.0, s3]], atol=1e-6)
    P = solve_are(-np.eye(2), np.eye(2), np.eye(2), np.eye(2))
    assert np.allclose(P, (np.sqrt(2) - 1) * np.eye(2), atol=1e-10)
    with pytest.raises(NoStabilizingSolution):
        solve_are(np.eye(2), np.zeros((2, 1)), np.eye(2), np.eye(1))


def test_are_random_closed_loop_hurwitz(rng):
    for _ in range(10):
        n, m = 3, 2
        A = rng.standard_normal((n, n))
        B = rng.standard_normal((n, m))
        P = solve_are(A, B, np.eye(n), np.eye(m))
        assert np.max(np.abs(are_residual(A, B, np.eye(n), np.eye(m), P))) <= 1e-8
        assert is_hurwitz(A - B @ B.T @ P)
        assert np.linalg.eigvalsh(P).min() > 0

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from imftbounds.errors import BallNotInPolyhedron, EpsTooLarge, ValidationError
from imftbounds.linalg import bilinear_norm
from imftbounds.qcqp import (F, QcqpProblem, kxx_pair, margin_curve, box_example, polyhedron_radius,
                             qcqp_jacobian, qcqp_margin, qcqp_nominal_solve, quad_form_sup)


@pytest.fixture(scope="module")
def example():
    return box_example()


def test_nominal_root(example):
    assert np.allclose(example.x0, [1.36, 1.74], atol=5e-3)
    assert np.max(np.abs(F(example, example.x0) - example.u0)) < 1e-10


def test_margin_values(example):
    rep = qcqp_margin(example, 0.86)
    assert rep.Mx == pytest.approx(0.3763, abs=1e-3)
    assert rep.Lx_const == pytest.approx(6.7204, abs=1e-3)
    assert rep.Kxx == 2.0
    assert rep.r_u == pytest.approx(1.546, abs=1e-3)
    pre = qcqp_margin(example, 0.86, preconditioned=True)
    assert pre.r_u == pytest.approx(1.5781, abs=1e-3)
    assert pre.r_u > rep.r_u


def test_margin_errors(example):
    with pytest.raises(BallNotInPolyhedron):
        qcqp_margin(example, 0.9)
    p = QcqpProblem(example.n, example.Qi, example.L, np.zeros((0, 2)), np.zeros(0), example.u0, example.x0)
    with pytest.raises(EpsTooLarge):
        qcqp_margin(p, 5.0)


def test_margin_curve_skips_out_of_range(example):
    curve = margin_curve(example, np.linspace(0.1, 1.2, 12))
    assert all(e <= 0.86 + 1e-12 for e, _ in curve)
    rs = [r for _, r in curve]
    assert rs == sorted(rs)


def test_x0_validation(example):
    with pytest.raises(ValidationError):
        QcqpProblem(2, example.Qi, example.L, example.A, example.b, example.u0, x0=[2.0, 2.0])


@settings(max_examples=40, deadline=None)
@given(arrays(float, (3, 3), elements=st.floats(-3, 3)))
def test_quad_form_sup_matches_brute(M):
    Q = 0.5 * (M + M.T)
    g = np.linspace(-1, 1, 21)
    X = np.array(np.meshgrid(g, g, g)).reshape(3, -1).T
    brute = np.max(np.abs(np.einsum("ni,ij,nj->n", X, Q, X)))
    exact = quad_form_sup(Q)
    assert exact >= brute - 1e-9
    assert exact <= bilinear_norm(Q[None], ) + 1e-9


def test_kxx_modes_ordered(example):
    a = kxx_pair(example.Qi, "abssum")
    e = kxx_pair(example.Qi, "exact")
    assert e[0] <= a[0] + 1e-12 and e[1] <= a[1] + 1e-12


def test_jacobian_fd(example):
    from imftbounds.oracle import fd_jacobian

    x = np.array([1.1, 2.2])
    assert np.allclose(qcqp_jacobian(example, x), fd_jacobian(lambda v: F(example, v), x), rtol=1e-7)


def test_polyhedron_radius(example):
    assert polyhedron_radius(example, example.x0) == pytest.approx(min(example.x0 - 0.5))


def test_nominal_solve_inside_box(example):
    x = qcqp_nominal_solve(example, np.array([2.5, 2.5]))
    assert np.allclose(x, example.x0, atol=1e-8)

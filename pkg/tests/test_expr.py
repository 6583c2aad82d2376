import numpy as np
import pytest

from imftbounds.errors import ValidationError
from imftbounds.expr import expr_map, expr_map_single, parse_expr
from imftbounds.oracle import ANALYTIC, BallPair, fd_jacobian


def test_parse_precedence():
    import sympy as sp

    x = sp.Symbol("x")
    assert sp.simplify(parse_expr("2 + 3*x^2", ["x"]) - (2 + 3 * x ** 2)) == 0
    assert sp.simplify(parse_expr("-x^2", ["x"]) + x ** 2) == 0
    assert sp.simplify(parse_expr("x^-1", ["x"]) - 1 / x) == 0


@pytest.mark.parametrize("bad", ["x +", "y", "x^1.5", "(x", "foo(x)"])
def test_parse_errors(bad):
    with pytest.raises(ValidationError):
        parse_expr(bad, ["x"])


def test_jacobians_and_hessians():
    o = expr_map(["a"], ["p", "q"], ["p*q - a", "sin(p) + a^2"])
    x, y = np.array([0.3]), np.array([0.7, -0.2])
    assert o.jacobian_provenance == ANALYTIC
    assert np.allclose(o.jac_y(x, y), fd_jacobian(lambda v: o.eval(x, v), y), rtol=1e-6, atol=1e-8)
    assert np.allclose(o.jac_x(x, y), fd_jacobian(lambda v: o.eval(v, y), x), rtol=1e-6, atol=1e-8)
    T = o.hess_tensor(x, y, "yy")
    assert T.shape == (2, 2, 2) and T[0, 0, 1] == 1.0


def test_constant_hessian_is_analytic():
    o = expr_map_single(["x"], ["x + x^2/2"])
    b = o.hess_bound(BallPair([0.0], [], 1.0, 1.0), "xx")
    assert b.certified and b.value == pytest.approx(1.0)
    o2 = expr_map_single(["x"], ["x^3"])
    assert not o2.hess_bound(BallPair([0.0], [], 1.0, 1.0), "xx").certified


def test_user_constants_trusted():
    o = expr_map_single(["x"], ["x^3"], constants={"Kxx": 6.0})
    b = o.hess_bound(BallPair([0.0], [], 1.0, 1.0), "xx")
    assert b.certified and b.value == 6.0


def test_duplicate_names():
    with pytest.raises(ValidationError):
        expr_map(["x"], ["x"], ["x"])

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from imftbounds.bounds import (FixXMaxY, FixYMaxX, ImftConstants, MaxX, Method, Modulus, SubspaceSpec,
                               argmax_radius, baseline_amr, directional_certify, ift_c1_certify, ift_c2_certify,
                               ift_c2_constants, imft_c0_certify, imft_c1_certify, imft_c2_certify,
                               imft_c2_feasible, imft_c2_max_x, imft_c2_solve, parse_objective, satisfies_c2,
                               BoundCertificate)
from imftbounds.errors import NoFeasibleRegion, NonPositiveM, SingularJacobian
from imftbounds.expr import expr_map, expr_map_single
from imftbounds.oracle import BallPair

pos = st.floats(1e-3, 1e3, allow_nan=False)
nonneg = st.floats(0.0, 1e3, allow_nan=False)
small = st.floats(0.0, 2.0)


def test_ift_constants_closed_form():
    c = ift_c2_constants(L=2.0, M=0.5, K=4.0, R=10.0)
    assert c.P == pytest.approx(0.5)
    assert c.P_prime == pytest.approx(0.5 * (2 - 1) / 1.0)
    assert c.N == pytest.approx(8 * 0.125 * 4)
    old = baseline_amr(L=2.0, M=0.5, K=4.0, R=10.0)
    assert old.P == pytest.approx(0.25)
    assert old.P_prime == pytest.approx(0.25)


@settings(max_examples=1000, deadline=None)
@given(L=pos, M=pos, K=pos, R=pos)
def test_baseline_dominated(L, M, K, R):
    new, old = ift_c2_constants(L, M, K, R), baseline_amr(L, M, K, R)
    for a in ("P", "P_prime", "Q", "Q_prime"):
        assert getattr(new, a) >= getattr(old, a) * (1 - 1e-12)


def test_nonpositive_M():
    with pytest.raises(NonPositiveM):
        ift_c2_constants(1.0, 0.0, 1.0, 1.0)
    with pytest.raises(NonPositiveM):
        ImftConstants(My=0.0, Lx=1.0)


@settings(max_examples=200, deadline=None)
@given(My=st.floats(0.1, 3.0), Lx=small, Kxx=small, Kxy=small, Kyy=st.floats(0.01, 2.0), ex=st.floats(1e-4, 0.1))
def test_feasible_interval_satisfies_inequalities(My, Lx, Kxx, Kxy, Kyy, ex):
    c = ImftConstants(My, Lx, Kxx, Kxy, Kyy)
    iv = imft_c2_feasible(c, ex)
    assume(not iv.empty and math.isfinite(iv.hi))
    for t in (0.1, 0.5, 0.9):
        ey = iv.lo + t * (iv.hi - iv.lo)
        lhs = 0.5 * Kxx * ex ** 2 + Kxy * ex * ey + 0.5 * Kyy * ey ** 2
        assert lhs <= ey / My - Lx * ex + 1e-9 * (1 + abs(ey / My))
        assert Kxy * ex + Kyy * ey <= 1 / My * (1 + 1e-12)


@settings(max_examples=200, deadline=None)
@given(My=pos, Lx=nonneg, Kxx=nonneg, Kxy=nonneg, Kyy=nonneg, ey=st.floats(1e-4, 10.0))
def test_max_x_is_supremum(My, Lx, Kxx, Kxy, Kyy, ey):
    c = ImftConstants(My, Lx, Kxx, Kxy, Kyy)
    sup = imft_c2_max_x(c, ey)
    assume(0 < sup < math.inf)
    assert satisfies_c2(c, sup * (1 - 1e-6), ey)
    assert not satisfies_c2(c, sup * (1 + 1e-6), ey)


def test_objectives_only_two_fixed():
    c = ImftConstants(1.0, 1.0, 1.0, 1.0, 1.0, Rx=1.0, Ry=1.0)
    ex, ey = imft_c2_solve(c, MaxX())
    assert satisfies_c2(c, ex, ey)
    ex2, ey2 = imft_c2_solve(c, FixXMaxY(ex / 2))
    assert ex2 == ex / 2 and satisfies_c2(c, ex2, ey2)
    ex3, ey3 = imft_c2_solve(c, FixYMaxX(ey2))
    assert ey3 == ey2 and ex3 >= ex2 * (1 - 1e-8)
    assert isinstance(parse_objective("max_x"), MaxX)
    with pytest.raises(ValueError):
        parse_objective("max_both")


def test_empty_region_raises():
    c = ImftConstants(10.0, 10.0, 10.0, 10.0, 10.0, Rx=0.01, Ry=0.01)
    with pytest.raises(NoFeasibleRegion):
        imft_c2_solve(c, FixXMaxY(0.01))


def test_sqrt_c2_certificate():
    o = expr_map(["x"], ["y"], ["y^2 - x"])
    c = imft_c2_certify(o, ([1.0], [1.0]), BallPair([1.0], [1.0], 0.9, 0.9), MaxX())
    assert c.method is Method.IMFT_C2 and c.certified
    assert c.constants["Kyy"] == pytest.approx(2.0)
    assert c.constants["My"] == pytest.approx(0.5)
    # y = sqrt(x) must stay inside the certified y-ball
    for x in np.linspace(1 - c.eps_x, 1 + c.eps_x, 21):
        assert abs(math.sqrt(x) - 1.0) < c.eps_y


def test_ift_c2_on_scalar():
    o = expr_map_single(["x"], ["x + x^2/2"])
    c = ift_c2_certify(o, [0.0], R=2.0)
    assert c.constants["M"] == pytest.approx(1.0) and c.constants["K"] == pytest.approx(1.0)
    assert c.eps_x == pytest.approx(1.0, rel=1e-8)
    assert c.eps_y == pytest.approx(0.5, rel=1e-8)
    assert ift_c2_certify(o, [0.0], R=2.0, baseline=True).eps_y <= c.eps_y


def test_singular_jacobian():
    o = expr_map_single(["x"], ["x^2"])
    with pytest.raises(SingularJacobian):
        ift_c2_certify(o, [0.0], R=1.0)


def test_ift_c1_objectives():
    o = expr_map_single(["x"], ["x + x^2/2"])
    cx = ift_c1_certify(o, [0.0], R=2.0, objective="max_x")
    cy = ift_c1_certify(o, [0.0], R=2.0, objective="max_y")
    # l(r) = r so eps_y(r) = r(1 - r) peaks at r = 1/2
    assert cy.eps_x == pytest.approx(0.5, rel=1e-6)
    assert cy.eps_y == pytest.approx(0.25, rel=1e-6)
    assert cx.eps_x == pytest.approx(1.0, rel=1e-6)
    assert cx.eps_y <= cy.eps_y


def test_ift_c1_inverse_mode_runs():
    o = expr_map_single(["x"], ["x + x^2/2"])
    c = ift_c1_certify(o, [0.0], R=0.8, mode="inverse")
    assert c.eps_x > 0 and c.eps_y > 0 and not c.certified


def test_imft_c1_alpha_bounds():
    o = expr_map(["x"], ["y"], ["y^2 - x"])
    ball = BallPair([1.0], [1.0], 0.3, 0.9)
    with pytest.raises(ValueError):
        imft_c1_certify(o, ([1.0], [1.0]), ball, alpha=1.0)
    c = imft_c1_certify(o, ([1.0], [1.0]), ball, alpha=0.9)
    assert c.constants["alpha_eff"] <= 0.9 + 1e-12


def test_argmax_smallest_tie():
    r = argmax_radius(lambda t: min(t, 0.5), 1.0)
    assert r == pytest.approx(0.5, abs=1e-2)
    assert r <= 0.5 + 1e-12


def test_modulus_rejects_nonmonotone():
    with pytest.raises(ValueError):
        Modulus([0.0, 1.0], [1.0, 0.5])


def test_c0_existence_only():
    c = imft_c0_certify(1.0, lambda d: d, lambda d, e: 0.5 * e, 0.1, np.linspace(0.01, 1.0, 50))
    assert not c.uniqueness
    assert 1.0 * (0.1 + 0.5 * c.eps_y) <= c.eps_y * (1 + 1e-9)


def test_directional_not_smaller_than_full_ball():
    o = expr_map_single(["u", "v"], ["u + 0.1*v^2", "v - 0.2*u*v"])
    full = ift_c2_certify(o, [0.0, 0.0], R=1.0)
    d = directional_certify(o, [0.0, 0.0], R=1.0, W=SubspaceSpec.coords([0]), eps_x=full.eps_x)
    assert d.constants["M_W"] <= d.constants["M"]
    assert d.eps_y >= full.eps_y * (1 - 1e-9)


def test_certificate_json_roundtrip():
    o = expr_map(["x"], ["y"], ["y^2 - x"])
    c = imft_c2_certify(o, ([1.0], [1.0]), BallPair([1.0], [1.0], 0.9, 0.9), MaxX())
    back = BoundCertificate.from_dict(c.to_dict())
    assert back.to_dict() == c.to_dict()

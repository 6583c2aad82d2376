import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imftbounds.errors import DivisionByZeroB, NoFeasibleRegion, ValidationError
from imftbounds.fblin import (FblinProblem, control_domain, example_problem, example_ratio, invariance_bound,
                              linearization_domain, simulate_containment, state_domain)
from imftbounds.verify import certificate_verify


@pytest.fixture(scope="module")
def ex():
    return example_problem()


def test_ratio_at_point_two(ex):
    c = control_domain(ex, 0.2, 0.5)
    assert c.constants["ratio_sup"] == pytest.approx(0.56, abs=1e-12)
    assert example_ratio(0.2) == pytest.approx(0.56, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.4), st.floats(0.05, 2.0))
def test_ratio_closed_form(rho_x, rho_u):
    c = control_domain(example_problem(), rho_x, rho_u)
    assert c.constants["ratio_sup"] == pytest.approx(example_ratio(rho_x), rel=1e-12)


def test_ratio_infeasible(ex):
    with pytest.raises(NoFeasibleRegion):
        control_domain(ex, 0.5, 1.0)


def test_state_domain_identity(ex):
    c = state_domain(ex)
    assert c.eps_x == pytest.approx(1.0, rel=1e-6)
    assert c.eps_y == pytest.approx(1.0, rel=1e-6)


def test_invariance_example(ex):
    assert invariance_bound(ex, 0.5, P_prime=1.0, tau=1e-12) == pytest.approx(0.5)
    with pytest.raises(NoFeasibleRegion):
        invariance_bound(ex, 1.5, P_prime=1.0)


def test_zero_B(ex):
    p = FblinProblem(ex.phi, ex.W, ex.A, np.zeros((2, 1)), ex.xstar, ex.ustar)
    with pytest.raises(DivisionByZeroB):
        invariance_bound(p, 0.1, 1.0)


def test_non_equilibrium(ex):
    with pytest.raises(ValidationError):
        FblinProblem(ex.phi, ex.W, ex.A, ex.B, np.array([0.5, 0.0]), ex.ustar, plant=ex.plant)


def test_containment():
    rep = simulate_containment(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0], [1.0]]), 0.5, 0.5, 1.0,
                               sequences=100, steps=2000)
    assert rep.left_P_prime == 0 and rep.max_norm < 1.0


def test_control_map_verifies(ex):
    c = control_domain(ex, 0.2, 0.5)
    assert certificate_verify(c, ex.W, x_samples=500, seeds=20).passed


def test_linearization_domain(ex):
    d = linearization_domain(ex, 0.2, 0.5)
    assert d.eps_v == pytest.approx(min(d.control.constants["eps_w"], d.eps_v_invariance))
    assert d.rho_z == pytest.approx(d.notes["P_phi_prime"] / 2.0)

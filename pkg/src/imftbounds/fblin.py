"""Certified domains for discrete-time feedback linearization.

The plant x+ = f(x, u) is linearized by a coordinate change z = phi(x) and
a control map v = W(x, u), giving z+ = A z + B v. Both maps are supplied as
oracles; nothing here derives them from f.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .bounds import DEFAULT_TAU, BoundCertificate, Method, ift_c1_certify
from .errors import DivisionByZeroB, NoFeasibleRegion, Singular, ValidationError
from .linalg import NormSpec, inverse, op_norm, vec_norm
from .oracle import ANALYTIC, BallPair, MapOracle


@dataclass
class FblinProblem:
    phi: MapOracle
    W: MapOracle
    A: np.ndarray
    B: np.ndarray
    xstar: np.ndarray
    ustar: np.ndarray
    plant: Optional[Callable] = None
    R: float = 1.0
    norm: NormSpec = NormSpec.INF

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = self.A.shape[0]
        self.B = np.asarray(self.B, dtype=float).reshape(n, -1)
        self.xstar = np.atleast_1d(np.asarray(self.xstar, dtype=float))
        self.ustar = np.atleast_1d(np.asarray(self.ustar, dtype=float))
        if self.phi.n != n or self.W.n != n or self.W.m != self.ustar.size or self.W.k != self.B.shape[1]:
            raise ValidationError("dimensions of phi, W, A, B and the equilibrium disagree")
        try:
            inverse(self.phi.jac_x(self.xstar))
            inverse(self.W.jac_y(self.xstar, self.ustar))
        except Singular as exc:
            raise ValidationError(f"linearizing maps are singular at the equilibrium: {exc}") from exc
        if self.plant is not None:
            nxt = np.asarray(self.plant(self.xstar, self.ustar), dtype=float)
            if vec_norm(nxt - self.xstar) > 1e-9 * (1.0 + vec_norm(self.xstar)):
                raise ValidationError("(xstar, ustar) is not an equilibrium of the plant")

    @property
    def zstar(self):
        return self.phi.eval(self.xstar)

    @property
    def vstar(self):
        return self.W.eval(self.xstar, self.ustar)


def state_domain(p: FblinProblem, R: Optional[float] = None, tau: float = DEFAULT_TAU) -> BoundCertificate:
    """(P_phi, P_phi') as (eps_x, eps_y): the radius maximizing the image radius."""
    return ift_c1_certify(p.phi, p.xstar, p.R if R is None else R, objective="max_y", norm=p.norm, tau=tau)


def control_domain(p: FblinProblem, eps_x: float, eps_u: float, tau: float = DEFAULT_TAU) -> BoundCertificate:
    """Largest eps_v with W(x, .) = v uniquely solvable in B(u*, eps_u).

    sup eps_v = eps_u/M_u - L_x eps_x - l_x eps_x - l_u eps_u, with M_u l_u < 1.
    The certificate is implicit in form: x is the state, y the control and
    the target v ranges over B(v*, eps_v) (constant eps_w).
    """
    if not (eps_x > 0 and eps_u > 0):
        raise ValueError("radii must be positive")
    norm = p.norm
    x0, u0 = p.xstar, p.ustar
    Mu = p.W.jac_y_inv_opnorm(x0, u0, norm)
    Lx = p.W.jac_x_opnorm(x0, u0, norm)
    ball = BallPair(x0, u0, eps_x, eps_u, norm)
    bx = p.W.lip_bound(ball, "jx")
    bu = p.W.lip_bound(ball, "jy")
    lx, lu = bx.value, bu.value
    if not Mu * lu < 1.0:
        raise NoFeasibleRegion(f"M_u l_u = {Mu * lu:.4g} is not below 1")
    sup = eps_u / Mu - eps_x * Lx - lx * eps_x - lu * eps_u
    if not sup > 0:
        raise NoFeasibleRegion("no positive eps_v for these radii")
    eps_v = sup * (1.0 - tau)
    consts = {"M_u": Mu, "L_x": Lx, "l_x": lx, "l_u": lu, "eps_v_sup": sup, "eps_w": eps_v,
              "ratio": eps_v / eps_u, "ratio_sup": sup / eps_u, "provenance": {"l_x": bx.provenance, "l_u": bu.provenance}}
    certified = bx.certified and bu.certified and p.W.jacobian_provenance == ANALYTIC
    return BoundCertificate(Method.IMFT_C1, eps_x, eps_u, True, consts, certified, tau, norm, x0, u0, p.vstar,
                            notes={"roles": "x is the state, y the control, w the new input v"})


def invariance_bound(p: FblinProblem, rho_z: float, P_prime: Optional[float] = None, tau: float = DEFAULT_TAU) -> float:
    """eps_v = (P_phi' - ||A|| rho_z)/||B||, shrunk by tau.

    With z in B(z*, rho_z) and v in B(v*, eps_v) this keeps z+ in B(z*, P_phi').
    """
    if P_prime is None:
        P_prime = state_domain(p, tau=tau).eps_y
    nB = op_norm(p.B, p.norm)
    if nB == 0:
        raise DivisionByZeroB("input matrix B is zero")
    nA = op_norm(p.A, p.norm)
    if not 0 < rho_z < P_prime or not nA * rho_z < P_prime:
        raise NoFeasibleRegion("need 0 < rho_z < P' and ||A|| rho_z < P'")
    return (P_prime - nA * rho_z) / nB * (1.0 - tau)


@dataclass
class ContainmentReport:
    sequences: int
    steps: int
    max_norm: float
    left_rho_z: int
    left_P_prime: int

    def to_dict(self):
        return dict(self.__dict__)


def simulate_containment(A, B, rho_z: float, eps_v: float, P_prime: float, sequences: int = 100, steps: int = 10_000,
                         seed: int = 0, norm: NormSpec = NormSpec.INF) -> ContainmentReport:
    """Linear dynamics e+ = A e + B w with ||w|| < eps_v from starts with ||e|| < rho_z.

    Counts sequences that ever leave B(0, rho_z) and B(0, P_prime).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    B = np.asarray(B, dtype=float).reshape(n, -1)
    m = B.shape[1]
    rng = np.random.default_rng(seed)
    if norm is not NormSpec.INF:
        raise ValueError("simulation samples the sup-norm ball")
    E = rng.uniform(-rho_z, rho_z, size=(sequences, n)) * (1 - 1e-12)
    out_z = np.zeros(sequences, dtype=bool)
    out_p = np.zeros(sequences, dtype=bool)
    worst = float(np.max(np.abs(E))) if sequences else 0.0
    for _ in range(steps):
        Wk = rng.uniform(-eps_v, eps_v, size=(sequences, m)) * (1 - 1e-12)
        E = E @ A.T + Wk @ B.T
        nrm = np.max(np.abs(E), axis=1)
        out_z |= nrm >= rho_z
        out_p |= nrm >= P_prime
        worst = max(worst, float(nrm.max()))
    return ContainmentReport(sequences, steps, worst, int(out_z.sum()), int(out_p.sum()))


@dataclass
class LinearizationDomain:
    rho_x: float
    rho_u: float
    rho_z: float
    eps_v: float
    state: BoundCertificate
    control: BoundCertificate
    eps_v_invariance: float
    notes: dict = field(default_factory=dict)

    def to_dict(self):
        return {"rho_x": self.rho_x, "rho_u": self.rho_u, "rho_z": self.rho_z, "eps_v": self.eps_v,
                "eps_v_invariance": self.eps_v_invariance, "state": self.state.to_dict(),
                "control": self.control.to_dict(), "notes": self.notes}


def linearization_domain(p: FblinProblem, rho_x: float, rho_u: float, rho_z: Optional[float] = None,
                         tau: float = DEFAULT_TAU) -> LinearizationDomain:
    """Intersect the state, control and containment bounds."""
    st = state_domain(p, tau=tau)
    if rho_x > st.eps_x:
        raise NoFeasibleRegion(f"rho_x = {rho_x} exceeds the state-map radius {st.eps_x:.6g}")
    ctl = control_domain(p, rho_x, rho_u, tau)
    Pp = st.eps_y
    nA = op_norm(p.A, p.norm)
    if rho_z is None:
        rho_z = Pp / (1.0 + nA)
    ev_inv = invariance_bound(p, rho_z, Pp, tau)
    eps_v = min(ctl.constants["eps_w"], ev_inv)
    return LinearizationDomain(rho_x, rho_u, rho_z, eps_v, st, ctl, ev_inv,
                               {"P_phi": st.eps_x, "P_phi_prime": Pp, "eps_v_control": ctl.constants["eps_w"]})


# -- the worked example --------------------------------------------------------------


def example_problem() -> FblinProblem:
    """x1+ = x2, x2+ = (1 + x1)^2 u, with phi = identity and W = (1 + x1)^2 u."""

    def phi_f(x, y):
        return np.array(x, dtype=float)

    phi = MapOracle(n=2, m=0, k=2, f=phi_f, jx=lambda x, y: np.eye(2),
                    hess_provider=lambda ball, which, norm: 0.0, lip_provider=lambda ball, which, norm: 0.0,
                    name="identity")

    def w_f(x, u):
        return np.array([(1.0 + x[0]) ** 2 * u[0]])

    def w_jx(x, u):
        return np.array([[2.0 * (1.0 + x[0]) * u[0], 0.0]])

    def w_ju(x, u):
        return np.array([[(1.0 + x[0]) ** 2]])

    def w_lip(ball, which, norm):
        if norm is not NormSpec.INF:
            return None
        rx = ball.Rx
        if which == "jx":
            # evaluated at u = u*; d/dx (2(1 + x1)u*) vanishes with u* = 0
            return 2.0 * abs(ball.y0[0]) * rx
        # sup |(1 + x1)^2 - (1 + x1*)^2| over |x1 - x1*| <= rx
        c = 1.0 + ball.x0[0]
        return max(abs((c + rx) ** 2 - c ** 2), abs((c - rx) ** 2 - c ** 2))

    def w_hess(x, u, which):
        if which == "xx":
            return np.array([[[2.0 * u[0], 0.0], [0.0, 0.0]]])
        if which == "xy":
            return np.array([[[2.0 * (1.0 + x[0])], [0.0]]])
        return np.zeros((1, 1, 1))

    W = MapOracle(n=2, m=1, k=1, f=w_f, jx=w_jx, jy=w_ju, hess=w_hess, lip_provider=w_lip, name="W")
    plant = lambda x, u: np.array([x[1], (1.0 + x[0]) ** 2 * u[0]])
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    B = np.array([[0.0], [1.0]])
    return FblinProblem(phi, W, A, B, np.zeros(2), np.zeros(1), plant=plant, R=1.0)


def example_ratio(rho_x: float) -> float:
    """Closed form of the example's eps_v/eps_u: 1 - rho_x(rho_x + 2)."""
    if not (2.0 + rho_x) * rho_x < 1.0:
        raise NoFeasibleRegion("(2 + rho_x) rho_x must be below 1")
    return 1.0 - rho_x * (rho_x + 2.0)

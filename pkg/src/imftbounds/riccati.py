"""Robustness of the stabilizing Riccati solution to perturbations of A.

f(A, P) = A^T P + P A + Q - P S P with S = B0 R^-1 B0^T. The unknown is
the symmetric P (upper-entry coordinates), the parameter is A
(row-major entries). Three norm conventions are supported:

  trace      A in the spectral norm, P and residuals in the trace norm
  entrywise  largest-entry norm everywhere
  frobenius  Frobenius norm everywhere

Each convention fixes M_P, L_A, the moduli and the ball-in-pd-cone radius.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import DEFAULT_TAU, BoundCertificate, FixYMaxX, argmax_radius, imft_c1_certify
from .errors import NoFeasibleRegion, NoStabilizingSolution, NotHurwitz, ValidationError
from .linalg import (NormSpec, are_residual, as_matrix, halfvec, is_hurwitz, lyapunov_halfvec_matrix,
                     lyapunov_inverse_norm, nuclear_norm_sym, op_norm, solve_are, solve_linear, sym_index,
                     unhalfvec, inverse)
from .oracle import BallPair, MapOracle, ball_points

CONVENTIONS = ("trace", "entrywise", "frobenius")
ARE_RESIDUAL_TOL = 1e-8


@dataclass
class AreProblem:
    A0: np.ndarray
    B0: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    P0: np.ndarray = field(init=False)
    Ac: np.ndarray = field(init=False)
    S: np.ndarray = field(init=False)

    def __post_init__(self):
        self.A0 = as_matrix(self.A0)
        n = self.A0.shape[0]
        self.B0 = np.asarray(self.B0, dtype=float).reshape(n, -1)
        self.Q = as_matrix(self.Q)
        self.R = as_matrix(self.R)
        if self.Q.shape != (n, n) or self.R.shape != (self.B0.shape[1],) * 2:
            raise ValidationError("dimension mismatch among A0, B0, Q, R")
        if not (np.allclose(self.Q, self.Q.T) and np.allclose(self.R, self.R.T)):
            raise ValidationError("Q and R must be symmetric")
        if np.linalg.eigvalsh(self.Q).min() < -1e-12:
            raise ValidationError("Q must be positive semidefinite")
        if self.B0.shape[1] and np.linalg.eigvalsh(self.R).min() <= 0:
            raise ValidationError("R must be positive definite")
        self.S = self.B0 @ solve_linear(self.R, self.B0.T) if self.B0.shape[1] else np.zeros((n, n))
        self.P0 = solve_are(self.A0, self.B0, self.Q, self.R)
        self.Ac = self.A0 - self.S @ self.P0
        if np.linalg.eigvalsh(self.P0).min() <= 0:
            raise NoStabilizingSolution("Riccati solution is not positive definite")

    @property
    def n(self):
        return self.A0.shape[0]

    @property
    def residual(self) -> float:
        return op_norm(are_residual(self.A0, self.B0, self.Q, self.R, self.P0))

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["A0"], float), np.array(d["B0"], float), np.array(d["Q"], float), np.array(d["R"], float))

    def to_dict(self):
        return {"A0": self.A0.tolist(), "B0": self.B0.tolist(), "Q": self.Q.tolist(), "R": self.R.tolist()}


def double_integrator() -> AreProblem:
    return AreProblem(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0], [1.0]]), np.eye(2), np.eye(1))


# -- norms per convention ---------------------------------------------------------


def _check(conv):
    if conv not in CONVENTIONS:
        raise ValueError(f"unknown convention {conv!r}; choose from {CONVENTIONS}")


def a_norm(D, conv: str) -> float:
    D = as_matrix(D)
    if conv == "trace":
        return op_norm(D, NormSpec.TWO)
    if conv == "entrywise":
        return float(np.max(np.abs(D))) if D.size else 0.0
    return float(np.linalg.norm(D))


def p_norm(E, conv: str) -> float:
    E = as_matrix(E)
    if conv == "trace":
        return nuclear_norm_sym(E)
    if conv == "entrywise":
        return float(np.max(np.abs(E))) if E.size else 0.0
    return float(np.linalg.norm(E))


def _fA_matrix(P):
    """Matrix of nu -> nu^T P + P nu, from row-major entries to upper entries."""
    n = P.shape[0]
    cols = []
    for i, j in itertools.product(range(n), range(n)):
        E = np.zeros((n, n))
        E[i, j] = 1.0
        cols.append(halfvec(E.T @ P + P @ E))
    return np.array(cols).T


def _fP_matrix(A, S, P):
    """Matrix of mu -> A^T mu + mu A - mu S P - P S mu in upper entries."""
    n = A.shape[0]
    Acl = A - S @ P
    return lyapunov_halfvec_matrix(Acl) if n else np.zeros((0, 0))


def _scaling(n):
    return np.array([1.0 if i == j else math.sqrt(2.0) for i, j in sym_index(n)])


def L_A_norm(P, conv: str) -> float:
    """||nu -> nu^T P + P nu|| from the A-space to the residual space."""
    P = as_matrix(P)
    if conv == "trace":
        # sup over the spectral ball is 2 ||P||_*, attained at nu = I for P psd
        return 2.0 * nuclear_norm_sym(P)
    T = _fA_matrix(P)
    if conv == "entrywise":
        return op_norm(T, NormSpec.INF)
    d = _scaling(P.shape[0])
    return op_norm(d[:, None] * T, NormSpec.TWO)


def M_P_norm(Ac, conv: str) -> float:
    """||(mu -> Ac^T mu + mu Ac)^-1|| on symmetric matrices."""
    if conv == "trace":
        return lyapunov_inverse_norm(Ac, NormSpec.INF, out="trace")
    if conv == "entrywise":
        return lyapunov_inverse_norm(Ac, NormSpec.INF, out="max")
    return lyapunov_inverse_norm(Ac, NormSpec.TWO)


def modulus_coefficients(p: AreProblem, conv: str):
    """(cA, cS) with l_P(rho_A, rho_P) <= 2 cA rho_A + 2 cS rho_P."""
    n = p.n
    if conv == "entrywise":
        return float(n), float(np.sum(np.abs(p.S)))
    return 1.0, op_norm(p.S, NormSpec.TWO)


def pd_radius(p: AreProblem, conv: str) -> float:
    """rho with B(P0, rho) inside the positive definite cone."""
    lam = float(np.linalg.eigvalsh(p.P0).min())
    return lam / p.n if conv == "entrywise" else lam


# -- constants, moduli and region -----------------------------------------------


@dataclass(frozen=True)
class AreConstants:
    M_P: float
    L_A: float
    cA: float
    cS: float
    pd_radius: float
    convention: str
    exact_M_P: bool

    def as_dict(self):
        return dict(self.__dict__)


def are_constants(p: AreProblem, convention: str = "trace") -> AreConstants:
    _check(convention)
    if not is_hurwitz(p.Ac):
        raise NotHurwitz("closed-loop matrix is not Hurwitz")
    cA, cS = modulus_coefficients(p, convention)
    exact = convention != "trace" or p.n <= 4
    return AreConstants(M_P_norm(p.Ac, convention), L_A_norm(p.P0, convention), cA, cS, pd_radius(p, convention),
                        convention, exact)


def are_moduli(p: AreProblem, rho_A: float, rho_P: float, convention: str = "trace"):
    """{l_A, l_P}; dF/dA does not depend on A, so l_A vanishes at fixed P0."""
    if not (rho_A > 0 and rho_P > 0):
        raise ValueError("radii must be positive")
    cA, cS = modulus_coefficients(p, convention)
    return {"l_A": 0.0, "l_P": 2.0 * cA * rho_A + 2.0 * cS * rho_P}


@dataclass
class AreRegion:
    """{(rho_A, rho_P)}: l_P rho_P < rho_P/M_P - L_A rho_A, M_P l_P < 1, rho_P < pd radius."""

    constants: AreConstants
    tau: float = DEFAULT_TAU

    @property
    def inv_M_P(self) -> float:
        return 1.0 / self.constants.M_P

    @property
    def uniq_rhs(self) -> float:
        """cA rho_A + cS rho_P must stay below this."""
        return 0.5 / self.constants.M_P

    def coefficients(self):
        c = self.constants
        return {"inv_M_P": self.inv_M_P, "L_A": c.L_A, "l_A": 0.0, "two_cA": 2 * c.cA, "two_cS": 2 * c.cS,
                "uniq_rhs": self.uniq_rhs, "cA": c.cA, "cS": c.cS, "pd_radius": c.pd_radius}

    def contains(self, rho_A: float, rho_P: float) -> bool:
        c = self.constants
        if not (rho_A >= 0 and rho_P > 0):
            return False
        lP = 2 * c.cA * rho_A + 2 * c.cS * rho_P
        return (lP * rho_P < rho_P * self.inv_M_P - c.L_A * rho_A and c.M_P * lP < 1.0
                and rho_P < c.pd_radius)

    def max_rho_A(self, rho_P: float) -> float:
        """Supremum of admissible rho_A at this rho_P (0 when none)."""
        c = self.constants
        if not (0 < rho_P < c.pd_radius):
            return 0.0
        a = (rho_P * self.inv_M_P - 2 * c.cS * rho_P ** 2) / (c.L_A + 2 * c.cA * rho_P)
        b = (self.uniq_rhs - c.cS * rho_P) / c.cA if c.cA > 0 else math.inf
        return max(0.0, min(a, b))

    def rho_P_top(self) -> float:
        c = self.constants
        top = c.pd_radius
        if c.cS > 0:
            top = min(top, self.uniq_rhs / c.cS, self.inv_M_P / (2 * c.cS))
        return top

    def best(self):
        """(rho_A, rho_P) maximizing rho_A."""
        top = self.rho_P_top()
        if not math.isfinite(top):
            top = 1.0
        rp = argmax_radius(self.max_rho_A, top * (1.0 - 1e-12))
        ra = self.max_rho_A(rp)
        if not ra > 0:
            raise NoFeasibleRegion("Riccati robustness region is empty")
        return ra * (1.0 - self.tau), rp

    def frontier(self, num: int = 50):
        """Pairs (rho_A, rho_P) on the upper boundary, shrunk by tau."""
        top = self.rho_P_top()
        if not math.isfinite(top):
            top = 1.0
        out = []
        for rp in np.linspace(top / num, top, num, endpoint=False):
            ra = self.max_rho_A(float(rp))
            if ra > 0:
                out.append((ra * (1.0 - self.tau), float(rp)))
        return out

    def to_dict(self, num: int = 50):
        return {"coefficients": self.coefficients(), "constants": self.constants.as_dict(),
                "frontier": [list(t) for t in self.frontier(num)]}


def are_robust_region(p: AreProblem, convention: str = "trace", tau: float = DEFAULT_TAU) -> AreRegion:
    reg = AreRegion(are_constants(p, convention), tau)
    reg.best()  # raises when empty
    return reg


# -- oracle form, for the generic C1 certifier and the verifier ----------------------


def are_oracle(p: AreProblem, convention: str = "trace") -> MapOracle:
    _check(convention)
    n = p.n
    k = n * (n + 1) // 2
    S, Q = p.S, p.Q

    def f(a, h):
        A = a.reshape(n, n)
        P = unhalfvec(h, n)
        return halfvec(A.T @ P + P @ A + Q - P @ S @ P)

    jx = lambda a, h: _fA_matrix(unhalfvec(h, n))
    jy = lambda a, h: _fP_matrix(a.reshape(n, n), S, unhalfvec(h, n))
    cA, cS = modulus_coefficients(p, convention)

    def lip(ball, which, norm):
        if which == "jx":
            return 0.0
        return 2.0 * cA * ball.Rx + 2.0 * cS * ball.Ry

    def hess_provider(ball, which, norm):
        return {"xx": 0.0, "xy": 2.0 * cA, "yy": 2.0 * cS}[which]

    return MapOracle(
        n=n * n, m=k, k=k, f=f, jx=jx, jy=jy,
        hess_provider=hess_provider, lip_provider=lip, name=f"are[{convention}]",
        x_norm=lambda a: a_norm(np.reshape(a, (n, n)), convention),
        y_norm=lambda h: p_norm(unhalfvec(h, n), convention),
        value_norm=lambda h: p_norm(unhalfvec(h, n), convention),
        jac_x_norm=lambda a, h: L_A_norm(unhalfvec(h, n), convention),
        jac_y_inv_norm=lambda a, h: M_P_norm(np.reshape(a, (n, n)) - S @ unhalfvec(h, n), convention),
    )


def are_certificate(p: AreProblem, rho_P: float, convention: str = "trace", tau: float = DEFAULT_TAU,
                    rho_A_cap: float = 1.0) -> BoundCertificate:
    """C1 implicit certificate in A-space at a fixed P-radius."""
    o = are_oracle(p, convention)
    ball = BallPair(p.A0.reshape(-1), halfvec(p.P0), rho_A_cap, rho_P)
    cert = imft_c1_certify(o, (p.A0.reshape(-1), halfvec(p.P0)), ball, alpha=1.0 - tau,
                           objective=FixYMaxX(rho_P), tau=tau)
    if rho_P >= pd_radius(p, convention):
        raise NoFeasibleRegion("P-ball leaves the positive definite cone")
    cert.notes["convention"] = convention
    cert.notes["pd_radius"] = pd_radius(p, convention)
    return cert


# -- sampling checks ------------------------------------------------------------------


def sample_perturbations(n: int, radius: float, count: int, convention: str, seed: int = 0):
    pts = ball_points(np.zeros(n * n), radius, count, seed=seed,
                      norm_fn=lambda v: a_norm(v.reshape(n, n), convention))
    return [pt.reshape(n, n) for pt in pts]


def verify_region_point(p: AreProblem, rho_A: float, rho_P: float, convention: str = "trace",
                        draws: int = 200, seed: int = 0, interior: float = 1.0 - 1e-9):
    """Re-solve the ARE at sampled A; count failures of the P-ball claim."""
    failures = 0
    worst = 0.0
    for D in sample_perturbations(p.n, rho_A * interior, draws, convention, seed):
        try:
            P = solve_are(p.A0 + D, p.B0, p.Q, p.R)
        except NoStabilizingSolution:
            failures += 1
            continue
        d = p_norm(P - p.P0, convention)
        worst = max(worst, d)
        if not d < rho_P or np.linalg.eigvalsh(P).min() <= 0:
            failures += 1
    return failures, worst


def check_pd_ball(p: AreProblem, convention: str = "trace", draws: int = 500, seed: int = 0):
    """Count symmetric E on the sphere of radius pd_radius*(1-1e-9) with P0+E not pd."""
    n = p.n
    r = pd_radius(p, convention) * (1.0 - 1e-9)
    k = n * (n + 1) // 2
    pts = ball_points(np.zeros(k), r, draws, seed=seed, boundary_frac=1.0,
                      norm_fn=lambda h: p_norm(unhalfvec(h, n), convention))
    bad = 0
    for h in pts:
        if np.linalg.eigvalsh(p.P0 + unhalfvec(h, n)).min() <= 0:
            bad += 1
    # the extreme direction: -r times the lowest eigenvector pair
    lam, V = np.linalg.eigh(p.P0)
    v = V[:, 0]
    E = -np.outer(v, v)
    E *= r / p_norm(E, convention)
    if np.linalg.eigvalsh(p.P0 + E).min() <= 0:
        bad += 1
    return bad


def sampled_l_P(p: AreProblem, rho_A: float, rho_P: float, convention: str = "trace", draws: int = 200, seed: int = 0):
    """Lower estimate of sup ||dF/dP(A,P) - dF/dP(A0,P0)|| over the product ball."""
    n = p.n
    rng = np.random.default_rng(seed)
    T0 = _fP_matrix(p.A0, p.S, p.P0)
    D_list = sample_perturbations(n, rho_A, draws, convention, seed)
    k = n * (n + 1) // 2
    Es = ball_points(np.zeros(k), rho_P, draws, seed=seed + 7, norm_fn=lambda h: p_norm(unhalfvec(h, n), convention))
    best = 0.0
    for D, h in zip(D_list, Es):
        G = _fP_matrix(p.A0 + D, p.S, p.P0 + unhalfvec(h, n)) - T0
        best = max(best, _sym_op_norm(G, n, convention, rng))
    return best


def _sym_op_norm(G, n, conv, rng, dirs=64):
    if conv == "entrywise":
        return op_norm(G, NormSpec.INF)
    if conv == "frobenius":
        d = _scaling(n)
        return op_norm(d[:, None] * G / d[None, :], NormSpec.TWO)
    # trace ball of symmetric matrices is the hull of +-v v^T
    best = 0.0
    for _ in range(dirs):
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
        best = max(best, nuclear_norm_sym(unhalfvec(G @ halfvec(np.outer(v, v)), n)))
    return best

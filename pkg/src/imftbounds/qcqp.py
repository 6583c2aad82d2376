"""Robust solvability margins for quadratic systems F(x) = Q(x) + L x = u.

Component i of Q(x) is x^T Q_i x. The solution is sought in the polyhedron
A x <= b, and the margin r_u is a radius such that every u with
||u - u0|| < r_u has a solution in B(x0, eps_x).

K constant convention. The second derivative of F is (v, w) -> (2 v^T Q_i w)_i,
so K_xx is twice the quadratic-form supremum max_i sup |x^T Q_i x| over the
unit box. With Q_1 = diag(1, 0), Q_2 = diag(0, 1) this gives K_xx = 2.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bounds import DEFAULT_TAU, BoundCertificate, Method
from .errors import (BallNotInPolyhedron, EpsTooLarge, NoConvergence, OutsidePolyhedron, Singular,
                     ValidationError)
from .linalg import NormSpec, bilinear_norm, inverse, op_norm, solve_linear, vec_norm
from .oracle import MapOracle

EXACT_MAX_N = 10
KXX_MODES = ("abssum", "spectral", "exact")


@dataclass
class QcqpProblem:
    n: int
    Qi: np.ndarray
    L: np.ndarray
    A: np.ndarray
    b: np.ndarray
    u0: np.ndarray
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        n = self.n
        self.Qi = np.asarray(self.Qi, dtype=float).reshape(n, n, n)
        self.L = np.asarray(self.L, dtype=float).reshape(n, n)
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.asarray(self.b, dtype=float).ravel()
        self.u0 = np.asarray(self.u0, dtype=float).ravel()
        if self.A.shape[0] != self.b.size:
            raise ValidationError("A and b sizes differ")
        if self.u0.size != n:
            raise ValidationError("u0 has the wrong size")
        for i, Q in enumerate(self.Qi):
            if not np.allclose(Q, Q.T, atol=1e-12, rtol=0):
                raise ValidationError(f"Q_{i} is not symmetric")
        if self.x0 is not None:
            self.x0 = np.asarray(self.x0, dtype=float).ravel()
            res = vec_norm(F(self, self.x0) - self.u0)
            if res > 1e-8:
                raise ValidationError(f"x0 residual {res:.2e} exceeds 1e-8")
            if not in_polyhedron(self, self.x0):
                raise ValidationError("x0 violates A x <= b")

    @classmethod
    def from_dict(cls, d: dict) -> "QcqpProblem":
        n = int(d["n"])
        A = d.get("A", np.zeros((0, n)))
        b = d.get("b", np.zeros(0))
        return cls(n, d["Qi"], d["L"], A, b, d["u0"], d.get("x0"))

    def to_dict(self) -> dict:
        d = {"n": self.n, "Qi": self.Qi.tolist(), "L": self.L.tolist(), "A": self.A.tolist(),
             "b": self.b.tolist(), "u0": self.u0.tolist()}
        if self.x0 is not None:
            d["x0"] = self.x0.tolist()
        return d


def box_example() -> QcqpProblem:
    """Two-dimensional example with box 0.5 <= x <= 3."""
    Qi = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]
    L = [[1.0, -3.0], [2.0, -1.0]]
    A = [[-1, 0], [1, 0], [0, -1], [0, 1]]
    b = [-0.5, 3, -0.5, 3]
    p = QcqpProblem(2, Qi, L, A, b, [-2.0, 4.0])
    p.x0 = qcqp_nominal_solve(p, np.array([1.75, 1.75]))
    return p


def F(p: QcqpProblem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.einsum("ijk,j,k->i", p.Qi, x, x) + p.L @ x


def qcqp_jacobian(p: QcqpProblem, x) -> np.ndarray:
    """2 Q'(x) + L, where row i of Q'(x) is x^T Q_i."""
    x = np.asarray(x, dtype=float)
    return 2.0 * np.einsum("ijk,k->ij", p.Qi, x) + p.L


def in_polyhedron(p: QcqpProblem, x, tol: float = 1e-12) -> bool:
    if p.A.shape[0] == 0:
        return True
    return bool(np.all(p.A @ x <= p.b + tol))


def _box_bounds(p: QcqpProblem):
    """(lo, hi) if every constraint is a single-variable bound, else None."""
    lo = np.full(p.n, -np.inf)
    hi = np.full(p.n, np.inf)
    for a, bi in zip(p.A, p.b):
        nz = np.flatnonzero(a)
        if nz.size != 1:
            return None
        j = nz[0]
        if a[j] > 0:
            hi[j] = min(hi[j], bi / a[j])
        else:
            lo[j] = max(lo[j], bi / a[j])
    return lo, hi


def qcqp_nominal_solve(p: QcqpProblem, seed, maxiter: int = 200, tol: float = 1e-9, u=None) -> np.ndarray:
    """Damped Newton on F(x) - u with iterates kept in the polyhedron."""
    u = p.u0 if u is None else np.asarray(u, dtype=float)
    x = np.asarray(seed, dtype=float).copy()
    if not np.all(np.isfinite(x)):
        raise ValueError("seed must be finite")
    box = _box_bounds(p)
    if box is not None:
        x = np.clip(x, *box)
    r = F(p, x) - u
    for _ in range(maxiter):
        nr = vec_norm(r)
        if nr <= tol:
            break
        try:
            d = -solve_linear(qcqp_jacobian(p, x), r)
        except Singular as exc:
            raise NoConvergence(f"singular Jacobian: {exc}") from exc
        t = 1.0
        feasible_now = in_polyhedron(p, x)
        while t > 1e-12:
            xn = x + t * d
            if box is not None:
                xn = np.clip(xn, *box)
            elif feasible_now and not in_polyhedron(p, xn):
                t *= 0.5
                continue
            rn = F(p, xn) - u
            if vec_norm(rn) < (1.0 - 1e-4 * t) * nr:
                break
            t *= 0.5
        else:
            raise NoConvergence("line search failed")
        x, r = xn, rn
    if vec_norm(r) > tol:
        raise NoConvergence(f"residual {vec_norm(r):.2e} after {maxiter} iterations")
    if not in_polyhedron(p, x, tol=1e-9):
        raise OutsidePolyhedron("root lies outside A x <= b")
    return x


# -- K constants ---------------------------------------------------------------


def quad_form_sup(Q: np.ndarray) -> float:
    """max |x^T Q x| over the unit infinity ball, by enumerating faces."""
    n = Q.shape[0]
    if n > EXACT_MAX_N:
        raise ValueError(f"exact enumeration limited to n <= {EXACT_MAX_N}")
    best = 0.0
    for pattern in itertools.product((-1.0, 1.0, 0.0), repeat=n):
        pat = np.array(pattern)
        free = pat == 0.0
        x = pat.copy()
        if free.any():
            S, T = np.flatnonzero(free), np.flatnonzero(~free)
            rhs = -Q[np.ix_(S, T)] @ pat[T] if T.size else np.zeros(S.size)
            QS = Q[np.ix_(S, S)]
            xs, *_ = np.linalg.lstsq(QS, rhs, rcond=None)
            if np.max(np.abs(QS @ xs - rhs), initial=0.0) > 1e-9 * (1.0 + np.abs(Q).max()):
                continue
            if np.max(np.abs(xs)) > 1.0 + 1e-12:
                continue
            x[S] = np.clip(xs, -1.0, 1.0)
        best = max(best, abs(float(x @ Q @ x)))
    return best


def kxx_pair(Qi: np.ndarray, mode: str = "abssum"):
    """(K for existence, K for uniqueness) under the infinity norm.

    abssum: 2 max_i sum |Q_i|; spectral: 2 n max_i ||Q_i||_2 (both serve for
    both roles). exact: twice the quadratic-form supremum for existence and
    twice the bilinear cut norm for uniqueness.
    """
    Qi = np.asarray(Qi, dtype=float)
    if Qi.size == 0:
        return 0.0, 0.0
    n = Qi.shape[1]
    if mode == "abssum":
        k = 2.0 * float(np.max(np.sum(np.abs(Qi), axis=(1, 2))))
        return k, k
    if mode == "spectral":
        k = 2.0 * n * max(op_norm(Q, NormSpec.TWO) for Q in Qi)
        return k, k
    if mode == "exact":
        return 2.0 * max(quad_form_sup(Q) for Q in Qi), 2.0 * bilinear_norm(Qi, NormSpec.INF)
    raise ValueError(f"unknown K mode {mode!r}")


def qcqp_kxx_bound(p: QcqpProblem, mode: str = "abssum") -> float:
    return kxx_pair(p.Qi, mode)[0]


def preconditioned_quadratics(p: QcqpProblem, x0) -> np.ndarray:
    """Quadratic parts of DF(x0)^-1 F."""
    Jinv = inverse(qcqp_jacobian(p, x0))
    return np.einsum("il,ljk->ijk", Jinv, p.Qi)


# -- margins -----------------------------------------------------------------------


@dataclass
class MarginReport:
    eps_x: float
    r_u: float
    Mx: float
    Kxx: float
    Lx_const: float
    preconditioned: bool
    ball_in_polyhedron: bool
    kxx_mode: str = "abssum"
    K_uniqueness: float = 0.0
    eps_x_max: float = math.inf
    r_u_transformed: Optional[float] = None
    conversion_factor: Optional[float] = None
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        return json.loads(json.dumps(d, default=float).replace("Infinity", '"inf"'))


def polyhedron_radius(p: QcqpProblem, x0) -> float:
    """Largest infinity-ball radius around x0 inside A x <= b."""
    if p.A.shape[0] == 0:
        return math.inf
    slack = p.b - p.A @ x0
    w = np.sum(np.abs(p.A), axis=1)
    with np.errstate(divide="ignore"):
        r = np.where(w > 0, slack / np.where(w > 0, w, 1.0), np.where(slack >= 0, np.inf, -np.inf))
    return float(np.min(r))


def _x0(p: QcqpProblem):
    if p.x0 is None:
        raise ValidationError("nominal solution x0 is required (run qcqp_nominal_solve)")
    return p.x0


def qcqp_margin(p: QcqpProblem, eps_x: float, preconditioned: bool = False, kxx_mode: Optional[str] = None) -> MarginReport:
    x0 = _x0(p)
    J = qcqp_jacobian(p, x0)
    Jinv = inverse(J)
    Mx = op_norm(Jinv)
    Lx = op_norm(J)
    if kxx_mode is None:
        kxx_mode = "exact" if preconditioned and p.n <= EXACT_MAX_N else "abssum"
    if preconditioned:
        K, Ku = kxx_pair(preconditioned_quadratics(p, x0), kxx_mode)
        M_eff = 1.0
    else:
        K, Ku = kxx_pair(p.Qi, kxx_mode)
        M_eff = Mx
    rad = polyhedron_radius(p, x0)
    eps_max = min(1.0 / (M_eff * Ku) if Ku > 0 else math.inf, rad)
    if not eps_x > 0:
        raise ValueError("eps_x must be positive")
    if Ku > 0 and eps_x * M_eff * Ku >= 1.0:
        raise EpsTooLarge(f"eps_x={eps_x:g} >= 1/(M K)={1.0 / (M_eff * Ku):g}")
    if eps_x > rad + 1e-15:
        raise BallNotInPolyhedron(f"B(x0, {eps_x:g}) leaves the polyhedron (radius {rad:g})")
    if preconditioned:
        r_bar = eps_x * (2.0 - K * eps_x) / 2.0
        r_u = r_bar / Mx
        return MarginReport(eps_x, r_u, Mx, K, Lx, True, True, kxx_mode, Ku, eps_max, r_bar, Mx,
                            {"jacobian_norm": Lx})
    r_u = eps_x * (2.0 - Mx * K * eps_x) / (2.0 * Mx)
    return MarginReport(eps_x, r_u, Mx, K, Lx, False, True, kxx_mode, Ku, eps_max)


def margin_curve(p: QcqpProblem, eps_grid: Sequence[float], preconditioned: bool = False, kxx_mode=None):
    """(eps_x, r_u) pairs; grid points outside the admissible range are skipped."""
    out = []
    for e in eps_grid:
        try:
            out.append((float(e), qcqp_margin(p, float(e), preconditioned, kxx_mode).r_u))
        except (EpsTooLarge, BallNotInPolyhedron, ValueError):
            continue
    return out


# -- oracle adapters -------------------------------------------------------------


def qcqp_map(p: QcqpProblem, kxx_mode: str = "abssum") -> MapOracle:
    """F itself as a single-argument oracle (inverse function setting)."""
    K = max(kxx_pair(p.Qi, kxx_mode))
    hess = lambda x: 2.0 * p.Qi
    return MapOracle.single(lambda x: F(p, x), p.n, jac=lambda x: qcqp_jacobian(p, x), hess=hess,
                            hess_provider=lambda ball, which, norm: K if norm is NormSpec.INF else None,
                            name="qcqp")


def qcqp_role_swap(p: QcqpProblem, kxx_mode: str = "abssum") -> MapOracle:
    """f(u, x) = F(x) - u: the parameter is u and the unknown is x."""
    n = p.n
    K = max(kxx_pair(p.Qi, kxx_mode))

    def hess(u, x, which):
        if which == "yy":
            return 2.0 * p.Qi
        return np.zeros((n, n, n))

    def provider(ball, which, norm):
        if norm is not NormSpec.INF:
            return None
        return K if which == "yy" else 0.0

    def lip(ball, which, norm):
        if norm is not NormSpec.INF:
            return None
        return 0.0 if which == "jx" else K * ball.Ry

    return MapOracle(n=n, m=n, k=n, f=lambda u, x: F(p, x) - u, jx=lambda u, x: -np.eye(n),
                     jy=lambda u, x: qcqp_jacobian(p, x), hess=hess, hess_provider=provider,
                     lip_provider=lip, name="qcqp")


def margin_certificate(p: QcqpProblem, report: MarginReport, tau: float = DEFAULT_TAU) -> BoundCertificate:
    """Implicit-form certificate: u in B(u0, r_u) has a root in B(x0, eps_x)."""
    x0 = _x0(p)
    consts = {k: v for k, v in report.to_dict().items() if k != "notes"}
    return BoundCertificate(Method.IMFT_C2, report.r_u * (1.0 - tau), report.eps_x, True, consts, True, tau,
                            NormSpec.INF, p.u0.copy(), x0.copy(), np.zeros(p.n),
                            notes={"roles": "x is u, y is the QCQP unknown"})

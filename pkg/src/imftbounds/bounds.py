"""Quantitative implicit and inverse function theorem bounds.

Every certify routine returns a BoundCertificate holding the radii and all
constants used to derive them. Strict inequalities are turned into concrete
radii by shrinking the supremal value by a factor (1 - tau).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import NoFeasibleRegion, NonPositiveM, Singular, SingularJacobian, SingularJacobianY
from .linalg import NormSpec, inverse, op_norm, vec_norm
from .oracle import ANALYTIC, BallPair, MapOracle, ball_points

DEFAULT_TAU = 1e-9
BISECT_RTOL = 1e-12
BISECT_MAXITER = 200


class Method(enum.Enum):
    IMFT_C2 = "ImftC2"
    IFT_C2 = "IftC2"
    IMFT_C1 = "ImftC1"
    IFT_C1 = "IftC1"
    IMFT_C0 = "ImftC0"
    DIRECTIONAL = "Directional"
    BASELINE_AMR = "BaselineAMR"
    HOLTZMAN = "Holtzman"


# certificates whose parameter is x and whose unknown is y in f(x, y) = w0
IMPLICIT_METHODS = {Method.IMFT_C2, Method.IMFT_C1, Method.IMFT_C0, Method.HOLTZMAN}


@dataclass(frozen=True)
class ImftConstants:
    My: float
    Lx: float
    Kxx: float = 0.0
    Kxy: float = 0.0
    Kyy: float = 0.0
    Rx: float = math.inf
    Ry: float = math.inf
    norm: NormSpec = NormSpec.INF
    certified: bool = True

    def __post_init__(self):
        if not self.My > 0:
            raise NonPositiveM("My must be positive")
        if min(self.Kxx, self.Kxy, self.Kyy, self.Lx) < 0:
            raise ValueError("constants must be nonnegative")

    def as_dict(self):
        return {k: getattr(self, k) for k in ("My", "Lx", "Kxx", "Kxy", "Kyy", "Rx", "Ry")}


def _jsonable(v):
    if isinstance(v, enum.Enum):
        return v.value
    if isinstance(v, (np.floating, float)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def _unjson(v):
    if v == "inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    if isinstance(v, dict):
        return {k: _unjson(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_unjson(x) for x in v]
    return v


@dataclass
class BoundCertificate:
    method: Method
    eps_x: float
    eps_y: float
    uniqueness: bool
    constants: dict
    certified: bool
    shrink_tau: float = DEFAULT_TAU
    norm: NormSpec = NormSpec.INF
    x0: Optional[np.ndarray] = None
    y0: Optional[np.ndarray] = None
    w0: Optional[np.ndarray] = None
    notes: dict = field(default_factory=dict)

    @property
    def implicit(self) -> bool:
        return self.method in IMPLICIT_METHODS

    @property
    def empty(self) -> bool:
        return not (self.eps_x > 0 and self.eps_y > 0)

    def to_dict(self) -> dict:
        d = {
            "method": self.method.value,
            "eps_x": self.eps_x,
            "eps_y": self.eps_y,
            "uniqueness": self.uniqueness,
            "certified": self.certified,
            "norm": self.norm.value,
            "shrink_tau": self.shrink_tau,
            "constants": self.constants,
        }
        for k in ("x0", "y0", "w0"):
            v = getattr(self, k)
            if v is not None:
                d[k] = np.asarray(v, dtype=float).tolist()
        if self.notes:
            d["notes"] = self.notes
        return _jsonable(d)

    @classmethod
    def from_dict(cls, d: dict) -> "BoundCertificate":
        d = _unjson(d)
        arr = lambda k: None if d.get(k) is None else np.asarray(d[k], dtype=float)
        return cls(
            method=Method(d["method"]),
            eps_x=float(d["eps_x"]),
            eps_y=float(d["eps_y"]),
            uniqueness=bool(d["uniqueness"]),
            constants=dict(d.get("constants", {})),
            certified=bool(d["certified"]),
            shrink_tau=float(d.get("shrink_tau", DEFAULT_TAU)),
            norm=NormSpec.parse(d.get("norm", "inf")),
            x0=arr("x0"),
            y0=arr("y0"),
            w0=arr("w0"),
            notes=dict(d.get("notes", {})),
        )

    @classmethod
    def empty_for(cls, method: Method, reason: str, norm=NormSpec.INF) -> "BoundCertificate":
        return cls(method, 0.0, 0.0, False, {}, False, norm=norm, notes={"empty": reason})


# -- objectives ---------------------------------------------------------------


@dataclass(frozen=True)
class FixXMaxY:
    eps_x: float


@dataclass(frozen=True)
class FixYMaxX:
    eps_y: float


@dataclass(frozen=True)
class MaxX:
    pass


Objective = Union[FixXMaxY, FixYMaxX, MaxX]


def parse_objective(name: str, value: Optional[float] = None) -> Objective:
    key = name.lower().replace("_", "").replace("-", "")
    if key == "maxx":
        return MaxX()
    if value is None:
        raise ValueError(f"objective {name} needs a radius")
    if key in ("fixxmaxy", "fixx"):
        return FixXMaxY(float(value))
    if key in ("fixymaxx", "fixy"):
        return FixYMaxX(float(value))
    raise ValueError(f"unknown objective {name!r}")


# -- C2 implicit function theorem ----------------------------------------------


@dataclass(frozen=True)
class Interval:
    """Open interval (lo, hi); empty when lo >= hi."""

    lo: float
    hi: float

    @property
    def empty(self) -> bool:
        return not self.lo < self.hi

    def __contains__(self, v) -> bool:
        return self.lo < v < self.hi


EMPTY = Interval(0.0, 0.0)


def imft_c2_feasible(c: ImftConstants, eps_x: float, tau: float = 0.0) -> Interval:
    """Feasible eps_y for fixed eps_x.

    With tau > 0 the uniqueness inequality is tightened to
    Kxy eps_x + Kyy eps_y <= (1 - tau)/My.
    """
    b = (1.0 - tau) / c.My - c.Kxy * eps_x
    b_full = 1.0 / c.My - c.Kxy * eps_x
    c0 = 0.5 * c.Kxx * eps_x ** 2 + c.Lx * eps_x
    if b_full <= 0 or b <= 0:
        return EMPTY
    if c.Kyy > 0:
        disc = b_full ** 2 - 2.0 * c.Kyy * c0
        if disc <= 0:
            return EMPTY
        sq = math.sqrt(disc)
        lo = 2.0 * c0 / (b_full + sq)
        # the uniqueness line passes through the vertex of the quadratic
        hi = b / c.Kyy
    else:
        lo = c0 / b_full
        hi = math.inf
    hi = min(hi, c.Ry * (1.0 - tau) if tau else c.Ry)
    if lo >= hi:
        return EMPTY
    return Interval(lo, hi)


def c2_lhs_rhs(c: ImftConstants, ex: float, ey: float):
    lhs = 0.5 * c.Kxx * ex ** 2 + c.Kxy * ex * ey + 0.5 * c.Kyy * ey ** 2
    rhs = ey / c.My - c.Lx * ex
    return lhs, rhs


def satisfies_c2(c: ImftConstants, ex: float, ey: float, tau: float = 0.0) -> bool:
    lhs, rhs = c2_lhs_rhs(c, ex, ey)
    uniq = c.Kxy * ex + c.Kyy * ey
    ok_u = uniq <= (1.0 - tau) / c.My if tau else uniq < 1.0 / c.My
    return bool(lhs < rhs and ok_u and 0 < ex <= c.Rx and 0 < ey <= c.Ry)


def _pick_eps_y(c: ImftConstants, ex: float, iv: Interval, tau: float) -> float:
    ey = iv.hi if math.isfinite(iv.hi) else c.Ry * (1.0 - tau)
    if not (iv.lo < ey) or not satisfies_c2(c, ex, ey, tau):
        ey = 0.5 * (iv.lo + iv.hi)
    return ey


def imft_c2_max_x(c: ImftConstants, eps_y: float, tau: float = 0.0) -> float:
    """Supremum of feasible eps_x for fixed eps_y (closed form)."""
    cc = 0.5 * c.Kyy * eps_y ** 2 - eps_y / c.My
    b = c.Kxy * eps_y + c.Lx
    if cc >= 0:
        return 0.0
    if c.Kxx > 0:
        sup = (-2.0 * cc) / (b + math.sqrt(b * b - 2.0 * c.Kxx * cc))
    elif b > 0:
        sup = -cc / b
    else:
        sup = math.inf
    room = (1.0 - tau) / c.My - c.Kyy * eps_y
    if room <= 0:
        return 0.0
    if c.Kxy > 0:
        sup = min(sup, room / c.Kxy)
    return min(sup, c.Rx)


def imft_c2_solve(c: ImftConstants, objective: Objective, tau: float = DEFAULT_TAU):
    """(eps_x, eps_y) for the given objective; raises NoFeasibleRegion."""
    if isinstance(objective, FixXMaxY):
        ex = objective.eps_x
        if not 0 < ex <= c.Rx:
            raise ValueError("eps_x must lie in (0, Rx]")
        iv = imft_c2_feasible(c, ex, tau)
        if iv.empty:
            raise NoFeasibleRegion(f"no feasible eps_y at eps_x={ex:g}")
        return ex, _pick_eps_y(c, ex, iv, tau)
    if isinstance(objective, FixYMaxX):
        ey = objective.eps_y
        if not 0 < ey <= c.Ry:
            raise ValueError("eps_y must lie in (0, Ry]")
        sup = imft_c2_max_x(c, ey, tau)
        ex = sup * (1.0 - tau)
        if not ex > 0 or not satisfies_c2(c, ex, ey, tau):
            raise NoFeasibleRegion(f"no feasible eps_x at eps_y={ey:g}")
        return ex, ey
    # MaxX: feasibility is monotone in eps_x
    ok = lambda ex: not imft_c2_feasible(c, ex, tau).empty
    top = c.Rx
    if ok(top):
        sup = top
    else:
        lo, hi = 0.0, top
        if not math.isfinite(hi):
            hi = 1.0
            while ok(hi):
                lo, hi = hi, 2.0 * hi
        for _ in range(BISECT_MAXITER):
            mid = 0.5 * (lo + hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
            if hi - lo <= BISECT_RTOL * hi:
                break
        sup = lo
    ex = sup * (1.0 - tau)
    iv = imft_c2_feasible(c, ex, tau)
    if not ex > 0 or iv.empty:
        raise NoFeasibleRegion("constants admit no positive pair")
    return ex, _pick_eps_y(c, ex, iv, tau)


def _jacobians(oracle: MapOracle, x0, y0, norm):
    try:
        My = oracle.jac_y_inv_opnorm(x0, y0, norm)
    except Singular as exc:
        raise SingularJacobianY(str(exc)) from exc
    return My, oracle.jac_x_opnorm(x0, y0, norm)


def imft_c2_constants(oracle: MapOracle, ball: BallPair):
    """Constants and provenance for the C2 implicit bound."""
    My, Lx = _jacobians(oracle, ball.x0, ball.y0, ball.norm)
    ks = {w: oracle.hess_bound(ball, w) for w in ("xx", "xy", "yy")}
    certified = all(b.certified for b in ks.values()) and oracle.jacobian_provenance == ANALYTIC
    c = ImftConstants(My, Lx, ks["xx"].value, ks["xy"].value, ks["yy"].value, ball.Rx, ball.Ry, ball.norm, certified)
    prov = {f"K{w}": b.provenance for w, b in ks.items()}
    return c, prov


def imft_c2_certify(oracle: MapOracle, at, ball: BallPair, objective: Objective = MaxX(), tau: float = DEFAULT_TAU) -> BoundCertificate:
    x0, y0 = (np.atleast_1d(np.asarray(v, dtype=float)) for v in at)
    w0 = oracle.eval(x0, y0)
    if oracle.m != oracle.k:
        raise SingularJacobianY("df/dy must be square")
    c, prov = imft_c2_constants(oracle, ball)
    ex, ey = imft_c2_solve(c, objective, tau)
    consts = c.as_dict()
    consts["provenance"] = prov
    iv = imft_c2_feasible(c, ex, tau)
    consts["eps_y_interval"] = [iv.lo, iv.hi]
    return BoundCertificate(Method.IMFT_C2, ex, ey, True, consts, c.certified, tau, ball.norm, x0, y0, w0)


# -- C2 inverse function theorem ------------------------------------------------


@dataclass(frozen=True)
class IftConstants:
    P: float
    P_prime: float
    N: float
    Q: float
    Q_prime: float

    def as_dict(self):
        return {"P": self.P, "P_prime": self.P_prime, "N": self.N, "Q": self.Q, "Q_prime": self.Q_prime}


def _check_lmkr(L, M, K, R):
    if not M > 0:
        raise NonPositiveM("M must be positive")
    if K < 0 or L < 0 or not R > 0:
        raise ValueError("need L >= 0, K >= 0, R > 0")


def ift_c2_constants(L: float, M: float, K: float, R: float) -> IftConstants:
    _check_lmkr(L, M, K, R)
    P = min(1.0 / (M * K), R) if K > 0 else R
    Pp = P * (2.0 - M * K * P) / (2.0 * M)
    N = 8.0 * M ** 3 * K
    terms = [P / (2.0 * M), P]
    if N * L > 0:
        terms.append(1.0 / (N * L))
    Q = min(terms)
    Qp = Q * (2.0 - L * N * Q) / L if L > 0 else R
    return IftConstants(P, Pp, N, Q, Qp)


def baseline_amr(L: float, M: float, K: float, R: float) -> IftConstants:
    """Constants of the classical inverse function theorem estimate."""
    _check_lmkr(L, M, K, R)
    P = min(1.0 / (2.0 * K * M), R) if K > 0 else R
    Pp = P / (2.0 * M)
    N = 8.0 * M ** 3 * K
    terms = [P / (2.0 * M), P]
    if N * L > 0:
        terms.append(1.0 / (2.0 * N * L))
    Q = min(terms)
    Qp = Q / (2.0 * L) if L > 0 else R
    return IftConstants(P, Pp, N, Q, Qp)


def _ift_basics(oracle: MapOracle, x0, norm):
    J = oracle.jac_x(x0)
    if J.shape[0] != J.shape[1]:
        raise SingularJacobian("Df must be square")
    try:
        Jinv = inverse(J)
    except Singular as exc:
        raise SingularJacobian(str(exc)) from exc
    if oracle.jac_y_inv_norm is not None:
        M = oracle.jac_y_inv_opnorm(x0)
    else:
        M = op_norm(Jinv, norm)
    return J, Jinv, oracle.jac_x_opnorm(x0, None, norm), M


def ift_c2_certify(oracle: MapOracle, x0, R: float, norm=NormSpec.INF, tau: float = DEFAULT_TAU, baseline: bool = False) -> BoundCertificate:
    """Every y in B(y0, eps_y) has a unique preimage in B(x0, eps_x)."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    y0 = oracle.eval(x0)
    _, _, L, M = _ift_basics(oracle, x0, norm)
    kb = oracle.hess_bound(BallPair(x0, np.zeros(0), R, R, norm), "xx")
    K = kb.value
    cst = (baseline_amr if baseline else ift_c2_constants)(L, M, K, R)
    if baseline:
        ex = cst.P * (1.0 - tau)
        ey = cst.P_prime * (1.0 - tau)
    else:
        ex = cst.P * (1.0 - tau)
        ey = ex * (2.0 - M * K * ex) / (2.0 * M) * (1.0 - tau)
    consts = {"L": L, "M": M, "K": K, "R": R, **cst.as_dict(), "provenance": {"K": kb.provenance}}
    certified = kb.certified and oracle.jacobian_provenance == ANALYTIC
    method = Method.BASELINE_AMR if baseline else Method.IFT_C2
    return BoundCertificate(method, ex, ey, True, consts, certified, tau, norm, x0, y0, None)


# -- C1 variants -------------------------------------------------------------------


def _bisect_last_true(pred, lo, hi, maxiter=BISECT_MAXITER):
    """Largest t in [lo, hi] with pred(t), given pred(lo) and not pred(hi)."""
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= BISECT_RTOL * hi:
            break
    return lo


class _C1Problem:
    def __init__(self, oracle, ball, alpha):
        self.oracle = oracle
        self.ball = ball
        self.alpha = alpha
        x0, y0 = ball.x0, ball.y0
        self.My, self.Lx = _jacobians(oracle, x0, y0, ball.norm)
        self.provenance = set()

    def sub(self, ex, ey):
        return BallPair(self.ball.x0, self.ball.y0, ex, ey, self.ball.norm)

    def lx(self, ex):
        b = self.oracle.lip_bound(self.sub(ex, self.ball.Ry), "jx")
        self.provenance.add(b.provenance)
        return b.value

    def ly(self, ex, ey):
        b = self.oracle.lip_bound(self.sub(ex, ey), "jy")
        self.provenance.add(b.provenance)
        return b.value

    def uniq_ok(self, ex, ey):
        return self.My * self.ly(ex, ey) <= self.alpha

    def exist_ok(self, ex, ey):
        return self.lx(ex) * ex + self.ly(ex, ey) * ey < ey / self.My - self.Lx * ex

    def ok(self, ex, ey):
        return self.uniq_ok(ex, ey) and self.exist_ok(ex, ey)

    def max_y(self, ex, tau):
        Ry = self.ball.Ry
        if self.uniq_ok(ex, Ry):
            top = Ry
        else:
            tiny = Ry * 1e-12
            if not self.uniq_ok(ex, tiny):
                return None
            top = _bisect_last_true(lambda e: self.uniq_ok(ex, e), tiny, Ry)
        cand = top * (1.0 - tau)
        if self.exist_ok(ex, cand):
            return cand
        grid = np.linspace(top, 0.0, 401)[1:-1]
        for g_hi, g in zip(np.concatenate([[cand], grid[:-1]]), grid):
            if self.exist_ok(ex, g):
                return _bisect_last_true(lambda e: self.exist_ok(ex, e), g, g_hi)
        return None


def imft_c1_certify(oracle: MapOracle, at, ball: BallPair, alpha: float, objective: Objective = None, tau: float = DEFAULT_TAU) -> BoundCertificate:
    """C1 implicit bound; default objective fixes eps_x = Rx."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    x0, y0 = (np.atleast_1d(np.asarray(v, dtype=float)) for v in at)
    ball = BallPair(x0, y0, ball.Rx, ball.Ry, ball.norm)
    w0 = oracle.eval(x0, y0)
    pb = _C1Problem(oracle, ball, alpha)
    if objective is None:
        objective = FixXMaxY(ball.Rx)
    if isinstance(objective, FixXMaxY):
        ex = objective.eps_x
        ey = pb.max_y(ex, tau)
    elif isinstance(objective, FixYMaxX):
        ey = objective.eps_y
        pred = lambda e: pb.ok(e, ey)
        if pred(ball.Rx):
            ex = ball.Rx * (1.0 - tau)
        else:
            tiny = ball.Rx * 1e-12
            ex = _bisect_last_true(pred, tiny, ball.Rx) * (1.0 - tau) if pred(tiny) else None
        if ex is not None and not pb.ok(ex, ey):
            ex = None
        if ex is None:
            ey = None
    else:
        feas = lambda e: pb.max_y(e, tau) is not None
        if feas(ball.Rx):
            ex = ball.Rx
        else:
            tiny = ball.Rx * 1e-12
            if not feas(tiny):
                raise NoFeasibleRegion("no feasible eps_x")
            ex = _bisect_last_true(feas, tiny, ball.Rx) * (1.0 - tau)
        ey = pb.max_y(ex, tau)
    if ex is None or ey is None or not ey > 0:
        raise NoFeasibleRegion("C1 conditions admit no radius pair")
    lx, ly = pb.lx(ex), pb.ly(ex, ey)
    consts = {
        "My": pb.My, "Lx": pb.Lx, "l_x": lx, "l_y": ly, "alpha": alpha,
        "alpha_eff": pb.My * ly, "Rx": ball.Rx, "Ry": ball.Ry,
    }
    certified = pb.provenance <= {ANALYTIC} and oracle.jacobian_provenance == ANALYTIC
    return BoundCertificate(Method.IMFT_C1, ex, ey, True, consts, certified, tau, ball.norm, x0, y0, w0)


def holtzman_check(k1: float, g1, g2, delta: float, eps: float, alpha: float):
    """(feasible, margin) for k1*g1(delta, eps) <= alpha < 1 and k1*g2(delta) <= eps*(1-alpha)."""
    v1 = k1 * _call(g1, delta, eps)
    v2 = k1 * _call(g2, delta)
    m1 = alpha - v1
    m2 = eps * (1.0 - alpha) - v2
    return bool(alpha < 1 and m1 >= 0 and m2 >= 0), min(m1, m2)


def _call(g, *args):
    if callable(g):
        return float(g(*args))
    return float(g)


def holtzman_certify(oracle: MapOracle, at, ball: BallPair, delta: float, alpha: float, tau: float = DEFAULT_TAU) -> BoundCertificate:
    """Largest eps for given delta, with g1 from the y-modulus and g2 = (Lx + l_x) delta."""
    x0, y0 = (np.atleast_1d(np.asarray(v, dtype=float)) for v in at)
    ball = BallPair(x0, y0, ball.Rx, ball.Ry, ball.norm)
    pb = _C1Problem(oracle, ball, alpha)
    k1 = pb.My
    g1 = lambda d, e: pb.ly(d, e)
    g2 = lambda d: (pb.Lx + pb.lx(d)) * d
    need = k1 * g2(delta) / (1.0 - alpha)
    first = lambda e: k1 * g1(delta, e) <= alpha
    if first(ball.Ry):
        top = ball.Ry
    elif first(need) and need > 0:
        top = _bisect_last_true(first, need, ball.Ry)
    else:
        raise NoFeasibleRegion("modulus exceeds alpha")
    eps = top * (1.0 - tau)
    ok, margin = holtzman_check(k1, g1, g2, delta, eps, alpha)
    if not ok or not eps > 0:
        raise NoFeasibleRegion("Holtzman conditions fail")
    consts = {"k1": k1, "Lx": pb.Lx, "g1": g1(delta, eps), "g2": g2(delta), "alpha": alpha, "margin": margin}
    certified = pb.provenance <= {ANALYTIC} and oracle.jacobian_provenance == ANALYTIC
    return BoundCertificate(Method.HOLTZMAN, delta, eps, True, consts, certified, tau, ball.norm, x0, y0, oracle.eval(x0, y0))


def _ift_c1_forward(M, lmod, R, objective, tau):
    feasible = lambda r: lmod(r) < 1.0 / M
    if feasible(R):
        rmax = R
    else:
        tiny = R * 1e-12
        if not feasible(tiny):
            raise NoFeasibleRegion("modulus exceeds 1/M at every radius")
        rmax = _bisect_last_true(feasible, tiny, R)
    eps_of = lambda r: r * (1.0 - M * lmod(r)) / M
    if objective == "max_x":
        r = rmax * (1.0 - tau)
    else:
        r = argmax_radius(eps_of, rmax)
    return r, eps_of(r) * (1.0 - tau)


def argmax_radius(phi: Callable[[float], float], rmax: float, grid: int = 400) -> float:
    """Smallest maximiser of phi on (0, rmax]: grid scan, then golden refinement."""
    rs = np.linspace(rmax / grid, rmax, grid)
    vals = np.array([phi(r) for r in rs])
    i = int(np.argmax(vals))  # first index among ties
    lo = rs[i - 1] if i > 0 else rs[0] * 1e-6
    hi = rs[i + 1] if i + 1 < grid else rs[i]
    best_r, best_v = rs[i], vals[i]
    g = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    for _ in range(80):
        c1 = b - g * (b - a)
        c2 = a + g * (b - a)
        if phi(c1) >= phi(c2):
            b = c2
        else:
            a = c1
    r = 0.5 * (a + b)
    if phi(r) > best_v:
        best_r = r
    return float(best_r)


def ift_c1_certify(oracle: MapOracle, x0, R: float, mode: str = "forward", objective: str = "max_x",
                   norm=NormSpec.INF, tau: float = DEFAULT_TAU) -> BoundCertificate:
    """C1 inverse function bound.

    mode="forward": f maps a subset of B(x0, eps_x) onto B(y0, eps_y).
    objective "max_x" takes the largest admissible eps_x, "max_y" maximises eps_y.
    mode="inverse": the modulus of Df^-1 is estimated by pulling balls back,
    and the roles of x and y are exchanged.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    y0 = oracle.eval(x0)
    J, Jinv, L, M = _ift_basics(oracle, x0, norm)
    prov = set()

    def lmod(r):
        b = oracle.lip_bound(BallPair(x0, np.zeros(0), r, r, norm), "jx")
        prov.add(b.provenance)
        return b.value

    if mode == "forward":
        ex, ey = _ift_c1_forward(M, lmod, R, objective, tau)
        consts = {"L": L, "M": M, "l": lmod(ex), "R": R, "objective": objective, "mode": mode}
        method_x, method_y = ex, ey
    elif mode == "inverse":
        # forward image radius r(r') = r'(1 - M l(r'))/M increases up to its argmax
        eps_of = lambda rp: rp * (1.0 - M * lmod(rp)) / M
        feasible = lambda rp: lmod(rp) < 1.0 / M
        rp_top = R if feasible(R) else _bisect_last_true(feasible, R * 1e-12, R)
        rp_star = argmax_radius(eps_of, rp_top)
        ry_top = eps_of(rp_star)

        def pullback(r):
            rp = _bisect_first_ge(eps_of, r, 0.0, rp_star)
            return rp

        def inv_mod(r):
            rp = pullback(r)
            return sampled_inverse_modulus(oracle, x0, Jinv, rp, norm), rp

        prov.add("sampled")
        ok = lambda r: inv_mod(r)[0] < 1.0 / L
        if ok(ry_top * (1.0 - tau)):
            ry = ry_top * (1.0 - tau)
        else:
            ry = _bisect_last_true(ok, ry_top * 1e-12, ry_top)
        mval, rp = inv_mod(ry)
        rx = ry * (1.0 - L * mval) / L * (1.0 - tau)
        consts = {"L": L, "M": M, "M_mod": mval, "r_prime": rp, "R": R, "mode": mode}
        method_x, method_y = rx, ry
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if not (method_x > 0 and method_y > 0):
        raise NoFeasibleRegion("empty C1 inverse-function region")
    consts["provenance"] = sorted(prov)
    certified = prov <= {ANALYTIC} and oracle.jacobian_provenance == ANALYTIC
    return BoundCertificate(Method.IFT_C1, method_x, method_y, True, consts, certified, tau, norm, x0, y0, None)


def _bisect_first_ge(phi, target, lo, hi):
    """Smallest t in [lo, hi] with phi(t) >= target for phi increasing on it."""
    for _ in range(BISECT_MAXITER):
        mid = 0.5 * (lo + hi)
        if phi(mid) >= target:
            hi = mid
        else:
            lo = mid
        if hi - lo <= BISECT_RTOL * max(hi, 1e-300):
            break
    return hi


def sampled_inverse_modulus(oracle: MapOracle, x0, Jinv, r, norm=NormSpec.INF, samples=None, safety=None) -> float:
    """Sampled sup of ||Df(x)^-1 - Df(x0)^-1|| over B(x0, r)."""
    samples = samples or oracle.samples
    safety = oracle.safety if safety is None else safety
    pts = ball_points(x0, r, samples, norm, seed=oracle.seed + 2, norm_fn=oracle.x_norm)
    best = 0.0
    for x in pts:
        best = max(best, op_norm(inverse(oracle.jac_x(x)) - Jinv, norm))
    return safety * best


# -- C0 existence variant ---------------------------------------------------------


class Modulus:
    """Nondecreasing piecewise-linear function tabulated on a grid."""

    def __init__(self, grid: Sequence[float], values: Sequence[float]):
        g = np.asarray(grid, dtype=float)
        v = np.asarray(values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape or g.size < 1:
            raise ValueError("grid and values must be matching 1-D tables")
        if np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(np.diff(v) < 0):
            raise ValueError("modulus table is not monotone")
        self.grid, self.values = g, v

    @classmethod
    def constant(cls, c: float) -> "Modulus":
        return cls([0.0, 1e300], [c, c])

    @classmethod
    def from_function(cls, fn, grid) -> "Modulus":
        return cls(grid, [fn(t) for t in grid])

    def __call__(self, t: float) -> float:
        if t < self.grid[0] - 1e-15 or t > self.grid[-1] * (1 + 1e-12):
            raise ValueError(f"argument {t} outside the tabulated range")
        return float(np.interp(t, self.grid, self.values))


class Modulus2:
    """Nondecreasing bilinear table g(a, b)."""

    def __init__(self, grid_a, grid_b, values):
        self.ga = np.asarray(grid_a, dtype=float)
        self.gb = np.asarray(grid_b, dtype=float)
        self.v = np.asarray(values, dtype=float)
        if self.v.shape != (self.ga.size, self.gb.size):
            raise ValueError("table shape mismatch")
        if np.any(np.diff(self.ga) <= 0) or np.any(np.diff(self.gb) <= 0):
            raise ValueError("grids must be strictly increasing")
        if np.any(np.diff(self.v, axis=0) < 0) or np.any(np.diff(self.v, axis=1) < 0):
            raise ValueError("modulus table is not monotone")

    @classmethod
    def from_function(cls, fn, grid_a, grid_b) -> "Modulus2":
        return cls(grid_a, grid_b, [[fn(a, b) for b in grid_b] for a in grid_a])

    def __call__(self, a: float, b: float) -> float:
        ga, gb = self.ga, self.gb
        if not (ga[0] - 1e-15 <= a <= ga[-1] * (1 + 1e-12) and gb[0] - 1e-15 <= b <= gb[-1] * (1 + 1e-12)):
            raise ValueError("argument outside the tabulated range")
        col = np.array([np.interp(b, gb, row) for row in self.v])
        return float(np.interp(a, ga, col))


def imft_c0_certify(k1: float, g2, g3, delta: float, eps_table: Sequence[float], at=None, w0=None,
                    norm=NormSpec.INF, certified: bool = True) -> BoundCertificate:
    """Existence-only bound: largest tabulated eps with k1 (g2(delta) + g3(delta, eps)) <= eps."""
    eps_table = np.sort(np.asarray(eps_table, dtype=float))
    cond = lambda e: k1 * (_call(g2, delta) + _call(g3, delta, e)) <= e
    found = None
    for i in range(eps_table.size - 1, -1, -1):
        e = eps_table[i]
        if cond(e):
            found = e
            if i + 1 < eps_table.size:
                found = _bisect_last_true(cond, e, eps_table[i + 1])
            break
    if found is None or not found > 0:
        raise NoFeasibleRegion("no tabulated eps satisfies the C0 condition")
    consts = {"k1": k1, "g2": _call(g2, delta), "g3": _call(g3, delta, found), "delta": delta}
    x0 = y0 = None
    if at is not None:
        x0, y0 = (np.atleast_1d(np.asarray(v, dtype=float)) for v in at)
    w0 = None if w0 is None else np.atleast_1d(np.asarray(w0, dtype=float))
    return BoundCertificate(Method.IMFT_C0, delta, float(found), False, consts, certified, 0.0, norm, x0, y0, w0)


# -- directional bound --------------------------------------------------------------


@dataclass(frozen=True)
class SubspaceSpec:
    indices: Optional[tuple] = None
    basis: Optional[np.ndarray] = None

    @classmethod
    def coords(cls, indices) -> "SubspaceSpec":
        idx = tuple(int(i) for i in indices)
        if len(set(idx)) != len(idx):
            raise ValueError("indices must be distinct")
        return cls(indices=idx)

    @classmethod
    def span(cls, basis) -> "SubspaceSpec":
        B = np.atleast_2d(np.asarray(basis, dtype=float))
        if np.linalg.matrix_rank(B) < B.shape[1]:
            raise ValueError("basis columns must be independent")
        return cls(basis=B)

    def matrix(self, dim: int) -> np.ndarray:
        if self.indices is not None:
            if any(i < 0 or i >= dim for i in self.indices):
                raise ValueError("index out of range")
            return np.eye(dim)[:, list(self.indices)]
        return self.basis

    def as_dict(self):
        if self.indices is not None:
            return {"indices": list(self.indices)}
        return {"basis": self.basis.tolist()}


def subspace_inverse_norm(Jinv, W: SubspaceSpec, norm=NormSpec.INF, samples=4096, seed=0):
    """(M_W, exact) with M_W = sup ||Jinv w|| / ||w|| over w in W."""
    dim = Jinv.shape[1]
    if W.indices is not None:
        return op_norm(Jinv[:, list(W.indices)], norm), True
    B = W.matrix(dim)
    if norm is NormSpec.TWO:
        Qb, _ = np.linalg.qr(B)
        return op_norm(Jinv @ Qb, NormSpec.TWO), True
    from .oracle import sobol_unit

    C = sobol_unit(B.shape[1], samples, seed)
    best = 0.0
    for c in C:
        w = B @ c
        s = vec_norm(w)
        if s > 0:
            best = max(best, vec_norm(Jinv @ w) / s)
    return best, False


def directional_certify(oracle: MapOracle, x0, R: float, W: SubspaceSpec, eps_x: Optional[float] = None,
                        norm=NormSpec.INF, tau: float = DEFAULT_TAU) -> BoundCertificate:
    """Targets y0 + w, w in W, ||w|| < r_W have a unique preimage in B(x0, eps_x)."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    y0 = oracle.eval(x0)
    _, Jinv, L, M = _ift_basics(oracle, x0, norm)
    kb = oracle.hess_bound(BallPair(x0, np.zeros(0), R, R, norm), "xx")
    K = kb.value
    MW, exact = subspace_inverse_norm(Jinv, W, norm)
    top = min(1.0 / (M * K), R) if K > 0 else R
    if eps_x is None:
        eps_x = top * (1.0 - tau)
    elif not 0 < eps_x <= R or (K > 0 and eps_x * M * K >= 1.0):
        raise NoFeasibleRegion("eps_x outside (0, min(1/(MK), R))")
    r_sup = eps_x * (2.0 - eps_x * M * K) / (2.0 * MW)
    consts = {"L": L, "M": M, "K": K, "R": R, "M_W": MW, "M_W_exact": exact, "r_W_sup": r_sup,
              "subspace": W.as_dict(), "provenance": {"K": kb.provenance}}
    certified = kb.certified and exact and oracle.jacobian_provenance == ANALYTIC
    return BoundCertificate(Method.DIRECTIONAL, eps_x, r_sup * (1.0 - tau), True, consts, certified, tau, norm, x0, y0, None)

"""Sampling checks for certificates: Newton multistart, boundary homotopies, degree.

None of this is a proof. Uniqueness is tested by multistart Newton, so a
pass means only that no second root was found.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .bounds import IMPLICIT_METHODS, BoundCertificate, Method
from .errors import Inconclusive, Singular, UnsupportedDimension, VanishesOnBoundary
from .linalg import NormSpec, inverse, solve_linear, vec_norm
from .oracle import MapOracle, ball_points, fd_jacobian

DEDUP_TOL = 1e-7
ROOT_TOL = 1e-9
BALL_SLACK = 1e-9
WINDING_CAP = 2 ** 20
VANISH_TOL = 1e-10
STEP_TOL = 1e-11


@dataclass
class VerifyReport:
    samples: int
    existence_failures: int = 0
    uniqueness_failures: int = 0
    worst_residual: float = 0.0
    degree: Optional[int] = None
    uniqueness_checked: bool = True
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.existence_failures == 0 and self.uniqueness_failures == 0

    def to_dict(self):
        return {
            "samples": self.samples, "existence_failures": self.existence_failures,
            "uniqueness_failures": self.uniqueness_failures, "worst_residual": self.worst_residual,
            "degree": self.degree, "uniqueness_checked": self.uniqueness_checked, "passed": self.passed,
            "notes": self.notes,
        }


# -- Newton multistart -------------------------------------------------------------


def _newton(g, jac, y, tol, maxiter):
    """Damped Newton; converged once the residual is below tol and the step is negligible."""
    r = g(y)
    nr = vec_norm(r)
    step_norm = math.inf
    for _ in range(maxiter):
        if not np.isfinite(nr):
            return None, math.inf
        if nr <= tol and step_norm <= STEP_TOL * (1.0 + vec_norm(y)):
            break
        try:
            step = solve_linear(jac(y), r)
        except Singular:
            return (y if nr <= tol * 1e-3 else None), nr
        t = 1.0
        while t > 1e-6:
            yn = y - t * step
            rn = g(yn)
            if np.all(np.isfinite(rn)) and vec_norm(rn) <= nr:
                break
            t *= 0.5
        else:
            return None, nr
        step_norm = t * vec_norm(step)
        y, r, nr = yn, rn, vec_norm(rn)
    else:
        return None, nr
    return y, nr


def newton_in_ball(g: Callable, y0, eps_y: float, seeds: int = 20, jac: Optional[Callable] = None,
                   norm=NormSpec.INF, norm_fn=None, seed: int = 0, tol: float = ROOT_TOL, maxiter: int = 60,
                   return_residual: bool = False):
    """Distinct roots of g within the closed ball B(y0, eps_y).

    Damped Newton from the center plus seeds - 1 low-discrepancy starts.
    """
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    dist = norm_fn if norm_fn is not None else (lambda v: vec_norm(v, norm))
    if jac is None:
        jac = lambda y: fd_jacobian(g, y)
    starts = [y0]
    if seeds > 1:
        starts += list(ball_points(y0, eps_y, seeds - 1, norm, seed=seed, boundary_frac=0.25, norm_fn=norm_fn))
    roots: List[np.ndarray] = []
    worst = 0.0
    for s in starts:
        y, res = _newton(g, jac, np.array(s, dtype=float), tol, maxiter)
        if y is None:
            continue
        if dist(y - y0) > eps_y * (1.0 + BALL_SLACK):
            continue
        worst = max(worst, res)
        if all(vec_norm(y - r) > DEDUP_TOL * (1.0 + vec_norm(r)) for r in roots):
            roots.append(y)
    return (roots, worst) if return_residual else roots


# -- certificate verification ----------------------------------------------------------


def _subspace_points(cert: BoundCertificate, dim, radius, count, seed):
    sub = cert.constants.get("subspace", {})
    if "indices" in sub:
        idx = list(sub["indices"])
        pts = ball_points(np.zeros(len(idx)), radius, count, cert.norm, seed=seed)
        out = np.zeros((count, dim))
        out[:, idx] = pts
        return out
    B = np.asarray(sub["basis"], dtype=float)
    C = ball_points(np.zeros(B.shape[1]), 1.0, count, cert.norm, seed=seed)
    out = []
    for c in C:
        w = B @ c
        s = vec_norm(w, cert.norm)
        out.append(w * (radius * min(1.0, vec_norm(c, cert.norm)) / s) if s > 0 else w)
    return np.array(out)


def certificate_verify(cert: BoundCertificate, oracle: MapOracle, x_samples: int = 500, seeds: int = 20,
                       seed: int = 0, interior: float = 1.0) -> VerifyReport:
    """Sample the parameter ball and count existence and uniqueness failures.

    Implicit certificates: for x in B(x0, eps_x) (and targets in B(w0, eps_w)
    when the certificate carries eps_w) look for roots of f(x, .) = w in
    B(y0, eps_y). Inverse-type certificates: for targets y in B(y0, eps_y)
    look for preimages in B(x0, eps_x).
    """
    rep = VerifyReport(samples=x_samples, uniqueness_checked=bool(cert.uniqueness))
    if cert.empty:
        rep.notes["skipped"] = "empty certificate"
        rep.samples = 0
        return rep
    norm = cert.norm
    tol_scale = lambda w: ROOT_TOL * (1.0 + vec_norm(w))
    if cert.method in IMPLICIT_METHODS:
        x0, y0 = cert.x0, cert.y0
        w0 = cert.w0 if cert.w0 is not None else oracle.eval(x0, y0)
        X = ball_points(x0, cert.eps_x * interior, x_samples, norm, seed=seed, norm_fn=oracle.x_norm)
        eps_w = float(cert.constants.get("eps_w", 0.0))
        W = ball_points(w0, eps_w * interior, x_samples, norm, seed=seed + 3) if eps_w > 0 else [w0] * x_samples
        for x, w in zip(X, W):
            g = lambda y, x=x, w=w: oracle.eval(x, y) - w
            jac = lambda y, x=x: oracle.jac_y(x, y)
            roots, res = newton_in_ball(g, y0, cert.eps_y, seeds, jac, norm, oracle.y_norm, seed=seed + 11,
                                        tol=tol_scale(w), return_residual=True)
            rep.worst_residual = max(rep.worst_residual, res)
            if not roots:
                rep.existence_failures += 1
            elif len(roots) > 1 and cert.uniqueness:
                rep.uniqueness_failures += 1
        return rep
    x0, y0 = cert.x0, cert.y0
    if cert.constants.get("mode") == "inverse":
        # f^-1 carries part of B(y0, eps_y) onto B(x0, eps_x): images must land in the y-ball
        X = ball_points(x0, cert.eps_x * interior, x_samples, norm, seed=seed, norm_fn=oracle.x_norm)
        for x in X:
            if oracle.f_dist(oracle.eval(x) - y0, norm) >= cert.eps_y:
                rep.existence_failures += 1
        rep.uniqueness_checked = False
        return rep
    if cert.method is Method.DIRECTIONAL:
        Y = y0 + _subspace_points(cert, y0.size, cert.eps_y * interior, x_samples, seed)
    else:
        Y = ball_points(y0, cert.eps_y * interior, x_samples, norm, seed=seed, norm_fn=oracle.value_norm)
    for y in Y:
        g = lambda x, y=y: oracle.eval(x) - y
        jac = lambda x: oracle.jac_x(x)
        roots, res = newton_in_ball(g, x0, cert.eps_x, seeds, jac, norm, oracle.x_norm, seed=seed + 11,
                                    tol=tol_scale(y), return_residual=True)
        rep.worst_residual = max(rep.worst_residual, res)
        if not roots:
            rep.existence_failures += 1
        elif len(roots) > 1 and cert.uniqueness:
            rep.uniqueness_failures += 1
    return rep


# -- boundary homotopy --------------------------------------------------------------


@dataclass
class HomotopyReport:
    passed: bool
    min_slack: float
    samples: int

    def to_dict(self):
        return dict(self.__dict__)


def sphere_points(center, radius, count, norm=NormSpec.INF, seed=0, norm_fn=None):
    """Points on the sphere of the given norm (the box surface for INF)."""
    return ball_points(center, radius, count, norm, seed=seed, boundary_frac=1.0, norm_fn=norm_fn)


def homotopy_boundary_check(f1: Callable, f2: Callable, points, norm=NormSpec.INF, value_norm=None) -> HomotopyReport:
    """Pass iff ||f1 - f2|| < ||f1|| at every boundary point."""
    vn = value_norm if value_norm is not None else (lambda v: vec_norm(v, norm))
    slack = math.inf
    count = 0
    for p in points:
        a = np.asarray(f1(p), dtype=float)
        b = np.asarray(f2(p), dtype=float)
        slack = min(slack, vn(a) - vn(a - b))
        count += 1
    return HomotopyReport(bool(count and slack > 0), float(slack), count)


def affine_comparison_check(cert: BoundCertificate, oracle: MapOracle, x_samples: int = 50,
                            boundary_samples: int = 200, seed: int = 0) -> HomotopyReport:
    """Compare f with its affine model on the sphere of the solution ball.

    Implicit: for sampled x, y -> f(x, y) - w0 against y -> J_y (y - y0) on
    the sphere of radius eps_y. Inverse-type: x -> f(x) - y against
    x -> J (x - x0) on the sphere of radius eps_x, for sampled targets y.
    """
    norm = cert.norm
    worst = HomotopyReport(True, math.inf, 0)

    def fold(r):
        worst.passed = worst.passed and r.passed
        worst.min_slack = min(worst.min_slack, r.min_slack)
        worst.samples += r.samples

    if cert.method in IMPLICIT_METHODS:
        x0, y0 = cert.x0, cert.y0
        w0 = cert.w0 if cert.w0 is not None else oracle.eval(x0, y0)
        Jy = oracle.jac_y(x0, y0)
        eps_w = float(cert.constants.get("eps_w", 0.0))
        X = ball_points(x0, cert.eps_x, x_samples, norm, seed=seed, norm_fn=oracle.x_norm)
        W = ball_points(w0, eps_w, x_samples, norm, seed=seed + 3) if eps_w > 0 else [w0] * x_samples
        S = sphere_points(y0, cert.eps_y, boundary_samples, norm, seed=seed + 5, norm_fn=oracle.y_norm)
        for x, w in zip(X, W):
            fold(homotopy_boundary_check(lambda y: Jy @ (y - y0), lambda y, x=x, w=w: oracle.eval(x, y) - w, S,
                                         norm, oracle.value_norm))
        return worst
    x0, y0 = cert.x0, cert.y0
    J = oracle.jac_x(x0)
    pre = inverse(J) if cert.constants.get("preconditioned") else None
    if cert.method is Method.DIRECTIONAL:
        Y = y0 + _subspace_points(cert, y0.size, cert.eps_y, x_samples, seed)
    else:
        Y = ball_points(y0, cert.eps_y, x_samples, norm, seed=seed, norm_fn=oracle.value_norm)
    S = sphere_points(x0, cert.eps_x, boundary_samples, norm, seed=seed + 5, norm_fn=oracle.x_norm)
    for y in Y:
        if pre is None:
            fold(homotopy_boundary_check(lambda x: J @ (x - x0), lambda x, y=y: oracle.eval(x) - y, S, norm,
                                         oracle.value_norm))
        else:
            fold(homotopy_boundary_check(lambda x: x - x0, lambda x, y=y: pre @ (oracle.eval(x) - y), S, norm))
    return worst


# -- degree -----------------------------------------------------------------------------


def _box_perimeter(center, half):
    """Counterclockwise parametrisation t in [0, 4) of the box boundary."""
    cx, cy = center
    hx, hy = half
    corners = np.array([[cx - hx, cy - hy], [cx + hx, cy - hy], [cx + hx, cy + hy], [cx - hx, cy + hy]])

    def point(t):
        k = int(min(math.floor(t), 3))
        s = t - k
        return corners[k] + s * (corners[(k + 1) % 4] - corners[k])

    return point


def _wrap(a):
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def degree_2d(f: Callable, center, radius, boundary_samples: int = 256, cap: int = WINDING_CAP) -> int:
    """Winding number of f around 0 along the box boundary.

    Segments whose angular step reaches pi/2 are bisected until every step
    is below pi/2; hitting the sample cap raises Inconclusive.
    """
    center = np.asarray(center, dtype=float)
    if center.size != 2:
        raise UnsupportedDimension("degree_2d needs a planar map")
    half = np.broadcast_to(np.asarray(radius, dtype=float), (2,))
    point = _box_perimeter(center, half)

    def ang(t):
        v = np.asarray(f(point(t)), dtype=float)
        nv = float(np.hypot(v[0], v[1]))
        if not nv > VANISH_TOL:
            raise VanishesOnBoundary(f"|f| = {nv:.3e} on the boundary")
        return math.atan2(v[1], v[0])

    ts = list(np.linspace(0.0, 4.0, boundary_samples + 1))
    angles = [ang(t) for t in ts[:-1]]
    angles.append(angles[0])
    count = boundary_samples
    total = 0.0
    # process segments with an explicit stack so refinement stays local
    segs = [(ts[i], ts[i + 1], angles[i], angles[i + 1]) for i in range(boundary_samples)]
    segs.reverse()
    while segs:
        t0, t1, a0, a1 = segs.pop()
        d = _wrap(a1 - a0)
        if abs(d) < math.pi / 2:
            total += d
            continue
        if count >= cap:
            raise Inconclusive("winding refinement hit the sample cap")
        tm = 0.5 * (t0 + t1)
        am = ang(tm)
        count += 1
        segs.append((tm, t1, am, a1))
        segs.append((t0, tm, a0, am))
    return int(round(total / (2.0 * math.pi)))


def degree_1d(f: Callable, center: float, radius: float) -> int:
    a = float(np.ravel(f(np.array([center - radius])))[0])
    b = float(np.ravel(f(np.array([center + radius])))[0])
    if min(abs(a), abs(b)) <= VANISH_TOL:
        raise VanishesOnBoundary("f vanishes at an endpoint")
    return int((np.sign(b) - np.sign(a)) / 2)


def degree(f: Callable, center, radius, boundary_samples: int = 256) -> int:
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.size == 1:
        return degree_1d(f, float(center[0]), float(np.ravel(radius)[0]))
    if center.size == 2:
        return degree_2d(f, center, radius, boundary_samples)
    raise UnsupportedDimension(f"degree in dimension {center.size} is not supported")


def sign_sum(f: Callable, jac: Optional[Callable], center, radius, seeds: int = 64, seed: int = 0) -> int:
    """Sum of sign det Df over Newton-found roots inside the box."""
    roots = newton_in_ball(f, center, radius, seeds, jac, NormSpec.INF, seed=seed)
    J = jac if jac is not None else (lambda x: fd_jacobian(f, x))
    c = np.asarray(center, dtype=float)
    inside = [r for r in roots if vec_norm(r - c) < radius]
    return int(sum(np.sign(np.linalg.det(J(r))) for r in inside))


def certificate_degree(cert: BoundCertificate, oracle: MapOracle, boundary_samples: int = 256) -> Optional[int]:
    """Degree of the defining map on the certified solution box, for 1-D and 2-D instances."""
    if cert.method in IMPLICIT_METHODS:
        x0, y0 = cert.x0, cert.y0
        w0 = cert.w0 if cert.w0 is not None else oracle.eval(x0, y0)
        g = lambda y: oracle.eval(x0, y) - w0
        c, r = y0, cert.eps_y
    else:
        g = lambda x: oracle.eval(x) - cert.y0
        c, r = cert.x0, cert.eps_x
    if c.size > 2 or cert.norm is not NormSpec.INF:
        return None
    return degree(g, c, r, boundary_samples)

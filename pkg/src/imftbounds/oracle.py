"""Map oracles: evaluation, first derivatives, and bounds over balls.

A MapOracle wraps f(x, y) with x in R^n, y in R^m and values in R^k. Maps of
a single argument (the inverse function setting) use m = 0.

Second-derivative bounds (K constants) and Jacobian moduli (l constants)
come either from an analytic provider, in which case they are trusted, or
from sampling, in which case they carry provenance "sampled" and any
certificate built on them is marked heuristic.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

from .errors import NonFinite
from .linalg import NormSpec, bilinear_norm, op_norm, vec_norm

EPS = np.finfo(float).eps
ANALYTIC = "analytic"
SAMPLED = "sampled"


@dataclass(frozen=True)
class Bound:
    value: float
    provenance: str = ANALYTIC

    @property
    def certified(self) -> bool:
        return self.provenance == ANALYTIC


@dataclass(frozen=True)
class BallPair:
    x0: np.ndarray
    y0: np.ndarray
    Rx: float
    Ry: float
    norm: NormSpec = NormSpec.INF

    def __post_init__(self):
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, dtype=float)))
        object.__setattr__(self, "y0", np.atleast_1d(np.asarray(self.y0, dtype=float)) if np.size(self.y0) else np.zeros(0))
        if not (self.Rx > 0 and self.Ry > 0):
            raise ValueError("ball radii must be positive")


def _checked(v) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if not np.all(np.isfinite(v)):
        raise NonFinite("map returned a non-finite value")
    return v


def fd_jacobian(f: Callable, at, h: Optional[float] = None) -> np.ndarray:
    """Central-difference Jacobian of a vector function."""
    x = np.atleast_1d(np.asarray(at, dtype=float))
    if h is None:
        h = np.cbrt(EPS) * (1.0 + vec_norm(x))
    if not h > 0:
        raise ValueError("step must be positive")
    f0 = _checked(f(x))
    J = np.empty((f0.size, x.size))
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        J[:, j] = (_checked(f(x + e)) - _checked(f(x - e))) / (2.0 * h)
    return J


def sobol_unit(dim: int, count: int, seed: int) -> np.ndarray:
    """`count` scrambled Sobol points in [-1, 1]^dim."""
    if dim == 0:
        return np.zeros((count, 0))
    sampler = qmc.Sobol(d=dim, scramble=True, seed=seed)
    m = int(np.ceil(np.log2(max(count, 2))))
    return 2.0 * sampler.random_base2(m)[:count] - 1.0


def _norm_fn(norm: NormSpec, custom=None):
    if custom is not None:
        return custom
    return lambda v: vec_norm(v, norm)


def ball_points(center, radius, count, norm=NormSpec.INF, seed=0, boundary_frac=0.5, norm_fn=None):
    """Low-discrepancy points in a closed ball, part of them on its sphere."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    nf = _norm_fn(norm, norm_fn)
    Z = sobol_unit(center.size, count, seed)
    nb = int(round(boundary_frac * count))
    out = np.empty_like(Z)
    for i, z in enumerate(Z):
        s = nf(z)
        if s == 0.0:
            out[i] = 0.0
            continue
        if i < nb:
            z = z / s
        elif s > 1.0:
            z = z / s
        out[i] = z
    return center + radius * out


def product_ball_points(ball: BallPair, count, seed=0, boundary_frac=0.5, x_norm=None, y_norm=None):
    """Points of B(x0, Rx) x B(y0, Ry); the boundary share touches at least one sphere."""
    n, m = ball.x0.size, ball.y0.size
    Z = sobol_unit(n + m, count, seed)
    nx = _norm_fn(ball.norm, x_norm)
    ny = _norm_fn(ball.norm, y_norm)
    nb = int(round(boundary_frac * count))
    X = np.empty((count, n))
    Y = np.empty((count, m))
    for i, z in enumerate(Z):
        zx, zy = z[:n], z[n:]
        sx = nx(zx) if n else 0.0
        sy = ny(zy) if m else 0.0
        if i < nb:
            s = max(sx, sy)
            if s > 0:
                zx, zy = zx / s, zy / s
        else:
            if sx > 1.0:
                zx = zx / sx
            if sy > 1.0:
                zy = zy / sy
        X[i] = ball.x0 + ball.Rx * zx
        Y[i] = ball.y0 + ball.Ry * zy
    return X, Y


class _MonotoneCache:
    """Keeps sampled suprema nondecreasing over nested balls."""

    def __init__(self):
        self._lock = threading.Lock()
        self._store = {}

    def merge(self, key, rx, ry, value):
        with self._lock:
            entries = self._store.setdefault(key, [])
            best = value
            for erx, ery, ev in entries:
                if erx <= rx and ery <= ry:
                    best = max(best, ev)
            for e in entries:
                if e[0] >= rx and e[1] >= ry:
                    e[2] = max(e[2], best)
            entries.append([rx, ry, best])
            return best


@dataclass(eq=False)
class MapOracle:
    """Map f(x, y) -> R^k with derivative access and bound providers.

    hess_provider(ball, which, norm) and lip_provider(ball, which, norm)
    return an analytic bound or None; None falls back to sampling.
    """

    n: int
    m: int
    k: int
    f: Callable
    jx: Optional[Callable] = None
    jy: Optional[Callable] = None
    hess: Optional[Callable] = None
    hess_provider: Optional[Callable] = None
    lip_provider: Optional[Callable] = None
    name: str = "map"
    x_norm: Optional[Callable] = None
    y_norm: Optional[Callable] = None
    jac_x_norm: Optional[Callable] = None
    jac_y_inv_norm: Optional[Callable] = None
    value_norm: Optional[Callable] = None
    samples: int = 256
    safety: float = 1.1
    seed: int = 0
    _cache: _MonotoneCache = field(default_factory=_MonotoneCache, repr=False)

    @classmethod
    def single(cls, f, n, jac=None, hess=None, hess_provider=None, lip_provider=None, name="map", **kw):
        """Oracle for a map of one argument f: R^n -> R^n."""
        return cls(
            n=n, m=0, k=n,
            f=lambda x, y: f(x),
            jx=None if jac is None else (lambda x, y: jac(x)),
            hess=None if hess is None else (lambda x, y, which: hess(x)),
            hess_provider=hess_provider,
            lip_provider=lip_provider,
            name=name,
            **kw,
        )

    # -- evaluation ----------------------------------------------------------

    def eval(self, x, y=None) -> np.ndarray:
        return _checked(self.f(np.atleast_1d(np.asarray(x, dtype=float)), self._y(y)))

    def _y(self, y):
        if y is None or self.m == 0:
            return np.zeros(0)
        return np.atleast_1d(np.asarray(y, dtype=float))

    def jac_x(self, x, y=None) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = self._y(y)
        if self.jx is not None:
            return _checked(self.jx(x, y)).reshape(self.k, self.n)
        return fd_jacobian(lambda xx: self.f(xx, y), x)

    def jac_y(self, x, y=None) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = self._y(y)
        if self.m == 0:
            return np.zeros((self.k, 0))
        if self.jy is not None:
            return _checked(self.jy(x, y)).reshape(self.k, self.m)
        return fd_jacobian(lambda yy: self.f(x, yy), y)

    @property
    def jacobian_provenance(self) -> str:
        if self.jx is not None and (self.m == 0 or self.jy is not None):
            return ANALYTIC
        return "fd"

    # -- norms in the parameter, unknown and value spaces --------------------

    def x_dist(self, dx, norm=NormSpec.INF) -> float:
        return self.x_norm(dx) if self.x_norm is not None else vec_norm(dx, norm)

    def y_dist(self, dy, norm=NormSpec.INF) -> float:
        return self.y_norm(dy) if self.y_norm is not None else vec_norm(dy, norm)

    def f_dist(self, dv, norm=NormSpec.INF) -> float:
        return self.value_norm(dv) if self.value_norm is not None else vec_norm(dv, norm)

    def jac_x_opnorm(self, x, y=None, norm=NormSpec.INF) -> float:
        if self.jac_x_norm is not None:
            return float(self.jac_x_norm(x, y))
        return op_norm(self.jac_x(x, y), norm)

    def jac_y_inv_opnorm(self, x, y=None, norm=NormSpec.INF) -> float:
        """||(df/dy)^-1||, or ||Df^-1|| for single-argument maps."""
        from .linalg import inverse

        if self.jac_y_inv_norm is not None:
            return float(self.jac_y_inv_norm(x, y))
        J = self.jac_x(x, y) if self.m == 0 else self.jac_y(x, y)
        return op_norm(inverse(J), norm)

    # -- second derivatives --------------------------------------------------

    def hess_tensor(self, x, y, which: str) -> np.ndarray:
        """Second-derivative tensor T[i, a, b] for which in {xx, xy, yy}."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = self._y(y)
        if self.hess is not None:
            return np.asarray(self.hess(x, y, which), dtype=float)
        first, second = which[0], which[1]
        jac = self.jac_x if first == "x" else self.jac_y
        a = self.n if first == "x" else self.m
        b = self.n if second == "x" else self.m
        T = np.empty((self.k, a, b))
        analytic = (self.jx if first == "x" else self.jy) is not None
        pt = x if second == "x" else y
        h = (np.cbrt(EPS) if analytic else EPS ** 0.25) * (1.0 + vec_norm(pt))
        for j in range(b):
            e = np.zeros(b)
            e[j] = h
            if second == "x":
                up, dn = jac(x + e, y), jac(x - e, y)
            else:
                up, dn = jac(x, y + e), jac(x, y - e)
            T[:, :, j] = (up - dn) / (2.0 * h)
        return T

    def hess_bound(self, ball: BallPair, which: str, norm=None, samples=None) -> Bound:
        norm = ball.norm if norm is None else norm
        if self.hess_provider is not None:
            v = self.hess_provider(ball, which, norm)
            if v is not None:
                return Bound(float(v), ANALYTIC)
        return sampled_hess_bound(self, ball, which, norm, samples or self.samples)

    def lip_bound(self, ball: BallPair, which: str, norm=None, samples=None) -> Bound:
        """Jacobian modulus over the ball; which = jx (at y0) or jy."""
        norm = ball.norm if norm is None else norm
        if self.lip_provider is not None:
            v = self.lip_provider(ball, which, norm)
            if v is not None:
                return Bound(float(v), ANALYTIC)
        return sampled_lip_bound(self, ball, which, norm, samples or self.samples)


def _key(oracle, kind, which, norm, ball):
    return (kind, which, norm, tuple(ball.x0), tuple(ball.y0))


def sampled_hess_bound(oracle: MapOracle, ball: BallPair, which: str, norm=NormSpec.INF, samples: int = 256) -> Bound:
    """Max sampled bilinear-form norm of the second derivative, times the safety factor."""
    if samples < 1:
        raise ValueError("need at least one sample")
    if (which[0] == "y" or which[1] == "y") and oracle.m == 0:
        return Bound(0.0, SAMPLED)
    X, Y = product_ball_points(ball, samples, seed=oracle.seed, x_norm=oracle.x_norm, y_norm=oracle.y_norm)
    X = np.vstack([ball.x0, X])
    Y = np.vstack([ball.y0, Y]) if oracle.m else np.zeros((X.shape[0], 0))
    best = 0.0
    for x, y in zip(X, Y):
        T = oracle.hess_tensor(x, y, which)
        if not np.all(np.isfinite(T)):
            raise NonFinite("second derivative is not finite")
        best = max(best, bilinear_norm(T, norm))
    value = oracle._cache.merge(_key(oracle, "hess", which, norm, ball), ball.Rx, ball.Ry, oracle.safety * best)
    return Bound(value, SAMPLED)


def sampled_lip_bound(oracle: MapOracle, ball: BallPair, which: str, norm=NormSpec.INF, samples: int = 256) -> Bound:
    X, Y = product_ball_points(ball, samples, seed=oracle.seed + 1, x_norm=oracle.x_norm, y_norm=oracle.y_norm)
    best = 0.0
    if which == "jx":
        J0 = oracle.jac_x(ball.x0, ball.y0)
        for x in X:
            best = max(best, op_norm(oracle.jac_x(x, ball.y0) - J0, norm))
    else:
        J0 = oracle.jac_y(ball.x0, ball.y0)
        for x, y in zip(X, Y):
            best = max(best, op_norm(oracle.jac_y(x, y) - J0, norm))
    value = oracle._cache.merge(_key(oracle, "lip", which, norm, ball), ball.Rx, ball.Ry, oracle.safety * best)
    return Bound(value, SAMPLED)

"""Dense small-matrix kernels: norms, solves, Lyapunov and Riccati equations.

Everything here works on plain numpy arrays. The default norm is the
infinity norm, for which every induced quantity below is computed exactly.
"""

from __future__ import annotations

import enum
import itertools
import logging
import warnings

import numpy as np
import scipy.linalg

from .errors import NoStabilizingSolution, NotHurwitz, Singular

log = logging.getLogger(__name__)

PIVOT_RTOL = 1e-13
HURWITZ_TOL = 1e-10
# Lyapunov vertex enumeration is exact up to this order.
VERTEX_MAX_ORDER = 4


class NormSpec(enum.Enum):
    INF = "inf"
    TWO = "two"

    @classmethod
    def parse(cls, value) -> "NormSpec":
        if isinstance(value, NormSpec):
            return value
        return cls(str(value).lower())


def as_matrix(M) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def vec_norm(v, norm: NormSpec = NormSpec.INF) -> float:
    v = np.ravel(np.asarray(v, dtype=float))
    if v.size == 0:
        return 0.0
    if norm is NormSpec.INF:
        return float(np.max(np.abs(v)))
    return float(np.linalg.norm(v))


def op_norm(M, norm: NormSpec = NormSpec.INF) -> float:
    """Induced operator norm (exact for INF, SVD for TWO)."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    M = np.atleast_2d(M)
    if norm is NormSpec.INF:
        return float(np.max(np.sum(np.abs(M), axis=1)))
    return float(np.linalg.norm(M, 2))


def bilinear_norm(T, norm: NormSpec = NormSpec.INF, max_exact: int = 16) -> float:
    """Norm of the bilinear map (u, v) -> (u^T T_i v)_i for T of shape (k, a, b).

    INF: exact cut norm max_i max_s ||T_i s||_1 over sign vectors when
    b <= max_exact, else the abs-sum bound. TWO: returns
    sqrt(sum_i ||T_i||_2^2), an upper bound.
    """
    T = np.asarray(T, dtype=float)
    if T.size == 0:
        return 0.0
    if norm is NormSpec.TWO:
        return float(np.sqrt(sum(np.linalg.norm(Ti, 2) ** 2 for Ti in T)))
    b = T.shape[2]
    if b > max_exact:
        return float(np.max(np.sum(np.abs(T), axis=(1, 2))))
    best = 0.0
    # s and -s give the same value, so fix the first sign
    for tail in itertools.product((1.0, -1.0), repeat=b - 1):
        s = np.array((1.0,) + tail)
        best = max(best, float(np.max(np.sum(np.abs(T @ s), axis=1))))
    return best


def _lu(M):
    M = as_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    scale = op_norm(M)
    if scale == 0.0:
        raise Singular("zero matrix")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
    if np.min(np.abs(np.diag(lu))) < PIVOT_RTOL * scale:
        raise Singular("pivot below threshold")
    return M, (lu, piv)


def solve_linear(M, rhs) -> np.ndarray:
    """Solve M x = rhs, raising Singular for tiny pivots."""
    M, fac = _lu(M)
    rhs = np.asarray(rhs, dtype=float)
    x = scipy.linalg.lu_solve(fac, rhs, check_finite=False)
    # one refinement sweep keeps the residual well under the tolerance
    r = rhs - M @ x
    x = x + scipy.linalg.lu_solve(fac, r, check_finite=False)
    return x


def inverse(M) -> np.ndarray:
    M = as_matrix(M)
    return solve_linear(M, np.eye(M.shape[0]))


def inverse_op_norm(M, norm: NormSpec = NormSpec.INF) -> float:
    return op_norm(inverse(M), norm)


def perturb_invert_margin(M, norm: NormSpec = NormSpec.INF) -> float:
    """Radius r such that M + B is invertible whenever ||B|| < r."""
    return 1.0 / inverse_op_norm(M, norm)


# -- symmetric matrices ------------------------------------------------------


def sym_index(n: int):
    """Upper-triangle index pairs in row-major order."""
    return [(i, j) for i in range(n) for j in range(i, n)]


def halfvec(S) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    return np.array([S[i, j] for i, j in sym_index(S.shape[0])])


def unhalfvec(h, n: int) -> np.ndarray:
    S = np.zeros((n, n))
    for k, (i, j) in enumerate(sym_index(n)):
        S[i, j] = S[j, i] = h[k]
    return S


def nuclear_norm_sym(S) -> float:
    return float(np.sum(np.abs(np.linalg.eigvalsh(S))))


def is_hurwitz(A, tol: float = HURWITZ_TOL) -> bool:
    A = as_matrix(A)
    return bool(np.all(np.linalg.eigvals(A).real < -tol))


def _lyap_kron(Ac):
    n = Ac.shape[0]
    I = np.eye(n)
    # row-major vec: vec(X B) = (I kron B^T) vec(X), vec(A X) = (A kron I) vec(X)
    return np.kron(Ac.T, I) + np.kron(I, Ac.T)


def solve_lyapunov(Ac, V) -> np.ndarray:
    """Solve Ac^T mu + mu Ac = V for symmetric mu."""
    Ac = as_matrix(Ac)
    V = as_matrix(V)
    if not is_hurwitz(Ac):
        raise NotHurwitz("closed-loop matrix is not Hurwitz")
    n = Ac.shape[0]
    mu = solve_linear(_lyap_kron(Ac), V.reshape(-1)).reshape(n, n)
    return 0.5 * (mu + mu.T)


def lyapunov_operator(Ac, mu) -> np.ndarray:
    return Ac.T @ mu + mu @ Ac


def lyapunov_halfvec_matrix(Ac) -> np.ndarray:
    """Matrix of mu -> Ac^T mu + mu Ac in upper-entry coordinates."""
    Ac = as_matrix(Ac)
    n = Ac.shape[0]
    idx = sym_index(n)
    T = np.zeros((len(idx), len(idx)))
    for c, (i, j) in enumerate(idx):
        E = np.zeros((n, n))
        E[i, j] = E[j, i] = 1.0
        T[:, c] = halfvec(lyapunov_operator(Ac, E))
    return T


def lyapunov_inverse_norm(Ac, norm: NormSpec = NormSpec.INF, out: str = "trace") -> float:
    """Norm of the inverse Lyapunov operator on symmetric matrices.

    Under INF the residual is measured by its largest entry. With
    out="trace" the solution is measured in the trace norm, which dominates
    the entrywise and spectral norms; for order <= 4 the supremum over the
    sign-vertex residuals is exact, beyond that an entrywise l1 bound is
    used. With out="max" the answer is exact at any order. TWO measures
    both sides in the Frobenius norm (exact).
    """
    Ac = as_matrix(Ac)
    if not is_hurwitz(Ac):
        raise NotHurwitz("closed-loop matrix is not Hurwitz")
    n = Ac.shape[0]
    Tinv = inverse(lyapunov_halfvec_matrix(Ac))
    idx = sym_index(n)
    if norm is NormSpec.TWO:
        d = np.array([1.0 if i == j else np.sqrt(2.0) for i, j in idx])
        return op_norm(d[:, None] * Tinv / d[None, :], NormSpec.TWO)
    if out == "max":
        return op_norm(Tinv, NormSpec.INF)
    if out != "trace":
        raise ValueError(f"unknown output measure {out!r}")
    if n <= VERTEX_MAX_ORDER:
        best = 0.0
        m = len(idx)
        for tail in itertools.product((1.0, -1.0), repeat=m - 1):
            c = Tinv @ np.array((1.0,) + tail)
            best = max(best, nuclear_norm_sym(unhalfvec(c, n)))
        return best
    w = np.array([1.0 if i == j else 2.0 for i, j in idx])
    log.debug("order %d: trace-norm bound is an overapproximation", n)
    return float(np.sum(w * np.sum(np.abs(Tinv), axis=1)))


# -- Riccati -----------------------------------------------------------------


def _bass_gain(A, B):
    n = A.shape[0]
    beta = op_norm(A, NormSpec.TWO) + 1.0
    Ac = -(A + beta * np.eye(n)).T
    Z = solve_lyapunov(Ac, -2.0 * B @ B.T)
    return B.T @ inverse(Z)


def stabilizing_gain(A, B) -> np.ndarray:
    """Some K with A - B K Hurwitz, via the controllable decomposition."""
    A = as_matrix(A)
    n = A.shape[0]
    B = np.asarray(B, dtype=float).reshape(n, -1)
    m = B.shape[1]
    if is_hurwitz(A):
        return np.zeros((m, n))
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    C = np.hstack(blocks)
    U, s, _ = np.linalg.svd(C)
    r = int(np.sum(s > 1e-10 * max(1.0, s[0] if s.size else 0.0)))
    Ab = U.T @ A @ U
    Bb = U.T @ B
    if r < n and not is_hurwitz(Ab[r:, r:]):
        raise NoStabilizingSolution("uncontrollable modes are not stable")
    K = np.zeros((m, n))
    if r > 0:
        K[:, :r] = _bass_gain(Ab[:r, :r], Bb[:r])
    return K @ U.T


def are_residual(A, B, Q, R, P) -> np.ndarray:
    B = np.asarray(B, dtype=float).reshape(np.shape(A)[0], -1)
    S = B @ solve_linear(R, B.T) if B.shape[1] else np.zeros(np.shape(A))
    return A.T @ P + P @ A + Q - P @ S @ P


def solve_are(A, B, Q, R, max_iter: int = 100, tol: float = 1e-13) -> np.ndarray:
    """Stabilizing solution of A^T P + P A + Q - P B R^-1 B^T P = 0 (Newton-Kleinman)."""
    A = as_matrix(A)
    n = A.shape[0]
    B = np.asarray(B, dtype=float).reshape(n, -1)
    Q = as_matrix(Q)
    if B.shape[1] == 0:
        if not is_hurwitz(A):
            raise NoStabilizingSolution("no inputs and A is not Hurwitz")
        return solve_lyapunov(A, -Q)
    R = as_matrix(R)
    K = stabilizing_gain(A, B)
    P = None
    for _ in range(max_iter):
        Ak = A - B @ K
        try:
            Pn = solve_lyapunov(Ak, -(Q + K.T @ R @ K))
        except (NotHurwitz, Singular) as exc:
            raise NoStabilizingSolution(str(exc)) from exc
        K = solve_linear(R, B.T @ Pn)
        done = P is not None and op_norm(Pn - P) <= tol * (1.0 + op_norm(Pn))
        P = Pn
        if done:
            break
    else:
        raise NoStabilizingSolution("Newton-Kleinman did not converge")
    res = op_norm(are_residual(A, B, Q, R, P))
    if not np.isfinite(res) or res > 1e-8 * max(1.0, op_norm(Q)):
        raise NoStabilizingSolution(f"residual {res:.3e} too large")
    if not is_hurwitz(A - B @ K):
        raise NoStabilizingSolution("closed loop not Hurwitz")
    return P

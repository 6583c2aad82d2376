"""Acceptance criteria 1-8, one PASS/FAIL line each.

Run under pytest (lines appear in the terminal summary) or directly with
python3 tests/test_acceptance.py.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
from conftest import needs_cases, record  # noqa: E402

from imftbounds import fblin, qcqp, riccati  # noqa: E402
from imftbounds.bounds import baseline_amr, ift_c2_constants  # noqa: E402
from imftbounds.linalg import NormSpec, are_residual, lyapunov_operator, solve_are, solve_lyapunov  # noqa: E402
from imftbounds.oracle import fd_jacobian  # noqa: E402
from imftbounds.verify import affine_comparison_check, certificate_degree  # noqa: E402

# (M_F, M_F', K_Fbar, max eps_x, max r_u)
TABLE_ROWS = {
    "case5": (0.5154, 0.0512, 12.971, 0.0771, 0.7529),
    "case9": (1.3802, 0.7968, 39.065, 0.0256, 0.0161),
}


def close(a, b, tol):
    return abs(a - b) <= tol


def test_criterion_1_qcqp():
    p = qcqp.box_example()
    rep = qcqp.qcqp_margin(p, 0.86)
    pre = qcqp.qcqp_margin(p, 0.86, preconditioned=True)
    checks = {
        "x0": bool(np.all(np.abs(p.x0 - [1.36, 1.74]) <= 5e-3)),
        "Mx": close(rep.Mx, 0.3763, 1e-3),
        "Lx": close(rep.Lx_const, 6.7204, 1e-3),
        "Kxx": rep.Kxx == 2.0,
        "r_u": close(rep.r_u, 1.546, 1e-3),
        "r_u_pre": close(pre.r_u, 1.5781, 1e-3),
    }
    detail = (f"x0=({p.x0[0]:.4f}, {p.x0[1]:.4f}) Mx={rep.Mx:.4f} Lx={rep.Lx_const:.4f} K={rep.Kxx:g} "
              f"r_u={rep.r_u:.4f} r_u_pre={pre.r_u:.4f}")
    bad = [k for k, v in checks.items() if not v]
    assert record(1, not bad, detail + (f" off: {bad}" if bad else "")), bad


def test_criterion_2_are():
    p = riccati.double_integrator()
    s3 = math.sqrt(3.0)
    c = riccati.are_constants(p, "trace")
    coef = riccati.AreRegion(c).coefficients()
    checks = {
        "P0": bool(np.all(np.abs(p.P0 - [[s3, 1], [1, s3]]) <= 1e-6)),
        "L_A": close(c.L_A, 6.928, 1e-3),
        "M_P": close(c.M_P, 3.0207, 1e-3),
        "1/M_P": close(coef["inv_M_P"], 0.3310, 1e-3),
        "1/(2M_P)": close(coef["uniq_rhs"], 0.1655, 1e-3),
    }
    detail = f"L_A={c.L_A:.4f} M_P={c.M_P:.4f} coefficients={coef['inv_M_P']:.4f}, {coef['uniq_rhs']:.4f}"
    bad = [k for k, v in checks.items() if not v]
    assert record(2, not bad, detail + (f" off: {bad}" if bad else "")), bad


def test_criterion_3_fblin():
    p = fblin.example_problem()
    cert = fblin.control_domain(p, 0.2, 0.5)
    got = cert.constants["ratio_sup"]
    closed = fblin.example_ratio(0.2)
    ok = close(got, 0.56, 1e-12) and close(closed, 0.56, 1e-12)
    assert record(3, ok, f"ratio(rho_x=0.2) computed={got:.15g} closed_form={closed:.15g}")


@needs_cases
def test_criterion_4_powerflow():
    from imftbounds.powerflow import find_case_file, load_case, pf_margin_row

    lines, ok = [], True
    for name, target in TABLE_ROWS.items():
        t = time.perf_counter()
        row, _, _ = pf_margin_row(load_case(find_case_file(name)), restrict_first_k_u=5)
        dt = time.perf_counter() - t
        got = row.values()[2:]
        rel = [abs(g - e) / abs(e) for g, e in zip(got, target)]
        case_ok = max(rel) <= 0.02 and dt < 30
        ok &= case_ok
        lines.append(f"{name} {'ok' if case_ok else 'off'} [" + ", ".join(f"{g:.4g}({r:+.1%})" for g, r in
                     zip(got, [(g - e) / e for g, e in zip(got, target)])) + f"] {dt:.2f}s")
    assert record(4, ok, "; ".join(lines))


def test_criterion_5_baseline_dominance():
    rng = np.random.default_rng(2024)
    bad = 0
    for _ in range(1000):
        L, M, K, R = np.exp(rng.uniform(-5, 5, size=4))
        new, old = ift_c2_constants(L, M, K, R), baseline_amr(L, M, K, R)
        if new.P < old.P or new.P_prime < old.P_prime:
            bad += 1
    assert record(5, bad == 0, f"1000 random (L, M, K, R), exceptions={bad}")


def test_criterion_6_soundness(corpus, corpus_reports):
    certified = [f for f in corpus if f.cert.certified]
    kinds = sorted({f.kind for f in certified})
    fails = {n: (r.existence_failures, r.uniqueness_failures) for n, r in corpus_reports.items()
             if n in {f.name for f in certified} and not r.passed}
    ok = len(certified) >= 10 and not fails and all(corpus_reports[f.name].samples >= 500 for f in certified)
    assert record(6, ok, f"{len(certified)} certified fixtures over {kinds}, 500 samples x 20 starts, "
                         f"failures={fails or 0}")


def _defining_jacobian(f):
    c = f.cert
    if c.implicit:
        return f.oracle.jac_y(c.x0, c.y0)
    return f.oracle.jac_x(c.x0)


def test_criterion_7_degree_and_homotopy(corpus):
    deg_bad, hom_bad, checked = [], [], 0
    for f in corpus:
        if not f.cert.certified:
            continue
        if f.planar:
            d = certificate_degree(f.cert, f.oracle)
            s = int(np.sign(np.linalg.det(_defining_jacobian(f))))
            checked += 1
            if d != s or d not in (-1, 1):
                deg_bad.append((f.name, d, s))
        if not affine_comparison_check(f.cert, f.oracle, x_samples=20, boundary_samples=100).passed:
            hom_bad.append(f.name)
    ok = not deg_bad and not hom_bad and checked > 0
    assert record(7, ok, f"{checked} planar degree checks, mismatches={deg_bad or 0}; homotopy failures={hom_bad or 0}")


def test_criterion_8_hygiene(corpus):
    worst_fd = 0.0
    for f in corpus:
        c, o = f.cert, f.oracle
        pts = [(c.x0, c.y0)] if c.implicit else [(c.x0, None)]
        rng = np.random.default_rng(1)
        for _ in range(3):
            x = c.x0 + 0.1 * c.eps_x * rng.uniform(-1, 1, c.x0.size) if not c.implicit else c.x0
            pts.append((x, c.y0 if c.implicit else None))
        for x, y in pts:
            pairs = [(o.jac_x(x, y), fd_jacobian(lambda v: o.eval(v, y), x))]
            if o.m:
                pairs.append((o.jac_y(x, y), fd_jacobian(lambda v: o.eval(x, v), y)))
            for J, Jfd in pairs:
                scale = max(1.0, float(np.max(np.abs(J))))
                worst_fd = max(worst_fd, float(np.max(np.abs(J - Jfd))) / scale)
    rng = np.random.default_rng(8)
    worst_lyap = 0.0
    worst_are = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 6))
        A = rng.standard_normal((n, n))
        Ac = A - (np.max(np.linalg.eigvals(A).real) + 0.5) * np.eye(n)
        V = rng.standard_normal((n, n))
        V = V + V.T
        worst_lyap = max(worst_lyap, float(np.max(np.abs(lyapunov_operator(Ac, solve_lyapunov(Ac, V)) - V))))
        B = rng.standard_normal((n, max(1, n - 1)))
        Q, R = np.eye(n), np.eye(B.shape[1])
        P = solve_are(A, B, Q, R)
        worst_are = max(worst_are, float(np.max(np.abs(are_residual(A, B, Q, R, P)))))
    ok = worst_fd <= 1e-6 and worst_lyap <= 1e-8 and worst_are <= 1e-8
    assert record(8, ok, f"fd/analytic rel={worst_fd:.1e} lyapunov={worst_lyap:.1e} are={worst_are:.1e}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))

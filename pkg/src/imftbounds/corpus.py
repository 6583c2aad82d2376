"""Fixture maps with analytic providers and their certificates.

Every fixture here is expected to certify (certified=True) and to pass the
sampling verifier with zero failures; the soundness tests iterate over it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

from . import fblin, qcqp, riccati
from .bounds import (BoundCertificate, FixXMaxY, MaxX, SubspaceSpec, directional_certify, ift_c1_certify,
                     ift_c2_certify, imft_c1_certify, imft_c2_certify)
from .expr import expr_map, expr_map_single
from .linalg import halfvec
from .oracle import BallPair, MapOracle
from .powerflow import parse_case, pf_margin_row

TWO_BUS_CASE = """function mpc = two_bus
mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1	0	1	1	1.1	0.9;
	2	1	0	0	0	0	1	1	0	1	1	1.1	0.9;
];
mpc.gen = [
	1	0	0	100	-100	1	100	1	100	0;
];
mpc.branch = [
	1	2	0	0.1	0	0	0	0	0	0	1	-360	360;
];
"""

TWO_BUS_LOADED = TWO_BUS_CASE.replace("2\t1\t0\t0\t", "2\t1\t20\t5\t").replace("two_bus", "two_bus_loaded")


@dataclass
class Fixture:
    name: str
    kind: str
    oracle: MapOracle
    cert: BoundCertificate
    dim: int

    @property
    def planar(self) -> bool:
        return self.dim == 2


def _ball(x0, y0, rx, ry):
    return BallPair(np.atleast_1d(np.asarray(x0, float)), np.atleast_1d(np.asarray(y0, float)), rx, ry)


def _scalar_ift_c2():
    o = expr_map_single(["x"], ["x + x^2/2"], name="x+x^2/2")
    return Fixture("scalar-ift-c2", "1d", o, ift_c2_certify(o, [0.0], R=2.0), 1)


def _scalar_ift_c1():
    o = expr_map_single(["x"], ["x + x^2/2"], name="x+x^2/2")
    return Fixture("scalar-ift-c1", "1d", o, ift_c1_certify(o, [0.0], R=2.0, objective="max_y"), 1)


def _sqrt_imft_c2():
    o = expr_map(["x"], ["y"], ["y^2 - x"], name="y^2-x")
    c = imft_c2_certify(o, ([1.0], [1.0]), _ball(1.0, 1.0, 0.9, 0.9), MaxX())
    return Fixture("sqrt-imft-c2", "1d", o, c, 1)


def _sqrt_imft_c1():
    o = expr_map(["x"], ["y"], ["y^2 - x"], name="y^2-x")
    c = imft_c1_certify(o, ([1.0], [1.0]), _ball(1.0, 1.0, 0.3, 0.9), alpha=0.9, objective=FixXMaxY(0.3))
    return Fixture("sqrt-imft-c1", "1d", o, c, 1)


def _planar_imft_c2():
    o = expr_map(["a", "b"], ["p", "q"], ["p + 0.5*q^2 - a", "q + 0.3*p*q - b + 0.2*a*p"], name="planar-implicit")
    c = imft_c2_certify(o, ([0.0, 0.0], [0.0, 0.0]), _ball([0, 0], [0, 0], 0.5, 0.5), MaxX())
    return Fixture("planar-imft-c2", "2d", o, c, 2)


def _planar_ift_c2():
    o = expr_map_single(["u", "v"], ["u + 0.1*v^2", "v - 0.2*u*v"], name="planar-inverse")
    return Fixture("planar-ift-c2", "2d", o, ift_c2_certify(o, [0.0, 0.0], R=1.0), 2)


def _planar_directional():
    o = expr_map_single(["u", "v"], ["u + 0.1*v^2", "v - 0.2*u*v"], name="planar-inverse")
    c = directional_certify(o, [0.0, 0.0], R=1.0, W=SubspaceSpec.coords([0]))
    return Fixture("planar-directional", "2d", o, c, 2)


def _qcqp_plain():
    p = qcqp.box_example()
    rep = qcqp.qcqp_margin(p, 0.86)
    return Fixture("qcqp-plain", "qcqp", qcqp.qcqp_role_swap(p), qcqp.margin_certificate(p, rep), 2)


def _qcqp_preconditioned():
    p = qcqp.box_example()
    rep = qcqp.qcqp_margin(p, 0.86, preconditioned=True)
    return Fixture("qcqp-preconditioned", "qcqp", qcqp.qcqp_role_swap(p), qcqp.margin_certificate(p, rep), 2)


def _are_trace():
    p = riccati.double_integrator()
    reg = riccati.are_robust_region(p)
    _, rho_P = reg.best()
    c = riccati.are_certificate(p, rho_P)
    return Fixture("are-double-integrator", "are", riccati.are_oracle(p), c, 3)


def _fblin_control():
    p = fblin.example_problem()
    return Fixture("fblin-control", "fblin", p.W, fblin.control_domain(p, 0.2, 0.5), 1)


def _fblin_state():
    p = fblin.example_problem()
    return Fixture("fblin-state", "fblin", p.phi, fblin.state_domain(p), 2)


def _two_bus():
    case = parse_case(TWO_BUS_LOADED, "two_bus_loaded")
    _, cert, pf = pf_margin_row(case, restrict_first_k_u=None)
    return Fixture("two-bus-powerflow", "qcqp", qcqp.qcqp_map(pf.qcqp), cert, 2)


BUILDERS: Dict[str, Callable[[], Fixture]] = {
    "scalar-ift-c2": _scalar_ift_c2,
    "scalar-ift-c1": _scalar_ift_c1,
    "sqrt-imft-c2": _sqrt_imft_c2,
    "sqrt-imft-c1": _sqrt_imft_c1,
    "planar-imft-c2": _planar_imft_c2,
    "planar-ift-c2": _planar_ift_c2,
    "planar-directional": _planar_directional,
    "qcqp-plain": _qcqp_plain,
    "qcqp-preconditioned": _qcqp_preconditioned,
    "are-double-integrator": _are_trace,
    "fblin-control": _fblin_control,
    "fblin-state": _fblin_state,
    "two-bus-powerflow": _two_bus,
}


def build_corpus() -> List[Fixture]:
    return [b() for b in BUILDERS.values()]


def fixture(name: str) -> Fixture:
    return BUILDERS[name]()

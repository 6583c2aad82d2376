"""Map references in problem files, resolved to oracles.

A reference is a dict with a "kind":

  expr        {"x": [...], "y": [...], "f": [...], "constants": {...}}
  qcqp        {"problem": {...} | "example": "box", "role": "swap" | "single"}
  are         {"problem": {...} | "example": "double_integrator", "convention": "trace"}
  powerflow   {"case": "case9", "slack_voltage": "setpoint"}
  builtin     {"name": "fblin-phi" | "fblin-W" | <fixture name>}
"""

from __future__ import annotations

from .errors import ValidationError
from .oracle import MapOracle


def load_qcqp(d):
    import numpy as np

    from .qcqp import QcqpProblem, box_example, qcqp_nominal_solve

    if d.get("example") == "box":
        return box_example()
    body = d.get("problem", d)
    p = QcqpProblem.from_dict(body)
    if p.x0 is None:
        if "seed" not in body:
            raise ValidationError("QCQP problem needs x0 or a Newton seed")
        p.x0 = qcqp_nominal_solve(p, np.asarray(body["seed"], dtype=float))
    return p


def load_are(d):
    from .riccati import AreProblem, double_integrator

    if d.get("example") == "double_integrator":
        return double_integrator()
    return AreProblem.from_dict(d.get("problem", d))


def build_map(ref: dict) -> MapOracle:
    kind = ref.get("kind")
    if kind == "expr":
        from .expr import expr_map

        return expr_map(ref.get("x", []), ref.get("y", []), ref["f"], name=ref.get("name", "expr"),
                        constants=ref.get("constants"))
    if kind == "qcqp":
        from .qcqp import qcqp_map, qcqp_role_swap

        p = load_qcqp(ref)
        mode = ref.get("kxx_mode", "abssum")
        return qcqp_role_swap(p, mode) if ref.get("role", "swap") == "swap" else qcqp_map(p, mode)
    if kind == "are":
        from .riccati import are_oracle

        return are_oracle(load_are(ref), ref.get("convention", "trace"))
    if kind == "powerflow":
        from .powerflow import build_pf_qcqp, find_case_file, load_case
        from .qcqp import qcqp_map

        case = load_case(find_case_file(ref["case"]))
        return qcqp_map(build_pf_qcqp(case, ref.get("slack_voltage", "setpoint")).qcqp, ref.get("kxx_mode", "abssum"))
    if kind == "builtin":
        name = ref["name"]
        if name in ("fblin-phi", "fblin-W"):
            from .fblin import example_problem

            p = example_problem()
            return p.phi if name == "fblin-phi" else p.W
        from .corpus import BUILDERS

        if name in BUILDERS:
            return BUILDERS[name]().oracle
        raise ValidationError(f"unknown builtin map {name!r}")
    raise ValidationError(f"unknown map kind {kind!r}")

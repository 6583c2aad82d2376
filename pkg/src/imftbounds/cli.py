"""Command-line front end.

Exit codes: 0 success, 1 input or parse error, 2 empty feasible region
(the report is still written, with an empty certificate), 3 a requested
verification found failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .bounds import (DEFAULT_TAU, BoundCertificate, FixXMaxY, MaxX, Method, SubspaceSpec, _jsonable,
                     directional_certify, holtzman_certify, ift_c1_certify, ift_c2_certify, imft_c1_certify,
                     imft_c2_certify, parse_objective)
from .errors import BallNotInPolyhedron, EpsTooLarge, ImftError, NoFeasibleRegion
from .linalg import NormSpec
from .oracle import BallPair
from .registry import build_map, load_are, load_qcqp

COMMANDS = ("imft", "ift", "qcqp", "powerflow", "riccati", "fblin", "verify")
EMPTY_REGION = (NoFeasibleRegion, EpsTooLarge, BallNotInPolyhedron)


@dataclass
class RunConfig:
    command: str
    input: Optional[str] = None
    case: Optional[str] = None
    norm: str = "inf"
    method: Optional[str] = None
    objective: Optional[str] = None
    eps_x: Optional[float] = None
    eps_y: Optional[float] = None
    shrink_tau: float = DEFAULT_TAU
    output: Optional[str] = None
    csv: Optional[str] = None
    sweep: Optional[str] = None
    verify: bool = False
    x_samples: int = 500
    seeds: int = 20
    seed: int = 0
    preconditioned: bool = False
    kxx_mode: Optional[str] = None
    restrict_u: Optional[int] = 5
    slack_voltage: str = "setpoint"
    convention: str = "trace"
    rho_p: Optional[float] = None
    rho_x: Optional[float] = None
    rho_u: Optional[float] = None
    rho_z: Optional[float] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if not 0 < self.shrink_tau <= 1e-3:
            raise ValueError("shrink_tau must lie in (0, 1e-3]")
        if self.x_samples < 1 or self.seeds < 1:
            raise ValueError("sample counts must be positive")

    @property
    def normspec(self) -> NormSpec:
        return NormSpec.parse(self.norm)


def parse_sweep(text: str):
    """'eps_x:a:b:n' -> (name, grid)."""
    parts = text.split(":")
    if len(parts) != 4:
        raise ValueError("sweep must look like eps_x:a:b:n")
    name, a, b, n = parts[0], float(parts[1]), float(parts[2]), int(parts[3])
    if name != "eps_x" or n < 1 or not b >= a:
        raise ValueError("sweep must be eps_x:a:b:n with a <= b and n >= 1")
    return name, [float(v) for v in np.linspace(a, b, n)]


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_csv(path, header, rows):
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in r])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _load_json(path):
    if path is None:
        raise ValueError("this command needs --input")
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _arr(v):
    return np.atleast_1d(np.asarray(v, dtype=float))


def _pick(cfg_value, prob, key, default=None):
    if cfg_value is not None:
        return cfg_value
    return prob.get(key, default)


class _Result:
    def __init__(self, method):
        self.method = method
        self.cert = None
        self.body = {}
        self.curve = None
        self.oracle = None


# -- commands ---------------------------------------------------------------------


def _objective(cfg, prob, implicit=True):
    name = _pick(cfg.objective, prob, "objective", "max_x")
    if name.lower().replace("_", "").replace("-", "") == "maxx":
        return MaxX()
    key = name.lower().replace("_", "").replace("-", "")
    value = _pick(cfg.eps_x if key.startswith("fixx") else cfg.eps_y, prob,
                  "eps_x" if key.startswith("fixx") else "eps_y")
    return parse_objective(name, value)


def run_imft(cfg: RunConfig, prob, res: _Result):
    oracle = build_map(prob["map"])
    res.oracle = oracle
    x0, y0 = _arr(prob["x0"]), _arr(prob["y0"])
    ball = BallPair(x0, y0, float(prob.get("Rx", 1.0)), float(prob.get("Ry", 1.0)), cfg.normspec)
    method = Method(_pick(cfg.method, prob, "method", "ImftC2"))
    res.method = method
    tau = cfg.shrink_tau

    def certify(objective):
        if method is Method.IMFT_C2:
            return imft_c2_certify(oracle, (x0, y0), ball, objective, tau)
        if method is Method.IMFT_C1:
            obj = None if isinstance(objective, MaxX) and "objective" not in prob and cfg.objective is None else objective
            return imft_c1_certify(oracle, (x0, y0), ball, float(prob.get("alpha", 0.9)), obj, tau)
        if method is Method.HOLTZMAN:
            delta = objective.eps_x if isinstance(objective, FixXMaxY) else float(prob.get("delta", ball.Rx))
            return holtzman_certify(oracle, (x0, y0), ball, delta, float(prob.get("alpha", 0.9)), tau)
        raise ValueError(f"method {method.value} is not an implicit certifier")

    if cfg.sweep:
        _, grid = parse_sweep(cfg.sweep)
        rows = []
        for e in grid:
            try:
                rows.append((e, certify(FixXMaxY(e)).eps_y))
            except EMPTY_REGION:
                rows.append((e, None))
        res.curve = (("eps_x", "eps_y"), rows)
    res.cert = certify(_objective(cfg, prob))


def run_ift(cfg: RunConfig, prob, res: _Result):
    oracle = build_map(prob["map"])
    res.oracle = oracle
    x0 = _arr(prob["x0"])
    R = float(prob.get("R", 1.0))
    method = Method(_pick(cfg.method, prob, "method", "IftC2"))
    res.method = method
    tau, norm = cfg.shrink_tau, cfg.normspec
    if method in (Method.IFT_C2, Method.BASELINE_AMR):
        res.cert = ift_c2_certify(oracle, x0, R, norm, tau, baseline=method is Method.BASELINE_AMR)
        M, K = res.cert.constants["M"], res.cert.constants["K"]
        curve = lambda e: e * (2.0 - M * K * e) / (2.0 * M) if 0 < e <= res.cert.constants["P"] else None
    elif method is Method.IFT_C1:
        obj = _pick(cfg.objective, prob, "objective", "max_x")
        res.cert = ift_c1_certify(oracle, x0, R, prob.get("mode", "forward"), obj, norm, tau)
        curve = None
    elif method is Method.DIRECTIONAL:
        sub = prob.get("subspace", {"indices": [0]})
        W = SubspaceSpec.coords(sub["indices"]) if "indices" in sub else SubspaceSpec.span(sub["basis"])
        res.cert = directional_certify(oracle, x0, R, W, _pick(cfg.eps_x, prob, "eps_x"), norm, tau)

        def curve(e):
            try:
                return directional_certify(oracle, x0, R, W, e, norm, tau).constants["r_W_sup"]
            except EMPTY_REGION:
                return None
    else:
        raise ValueError(f"method {method.value} is not an inverse-function certifier")
    if cfg.sweep:
        if curve is None:
            raise ValueError("sweeps are not available for this method")
        _, grid = parse_sweep(cfg.sweep)
        res.curve = (("eps_x", "eps_y"), [(e, curve(e)) for e in grid])


def run_qcqp(cfg: RunConfig, prob, res: _Result):
    from .qcqp import margin_certificate, margin_curve, qcqp_margin, qcqp_role_swap

    p = load_qcqp(prob)
    res.oracle = qcqp_role_swap(p)
    res.method = Method.IMFT_C2
    pre = bool(cfg.preconditioned or prob.get("preconditioned", False))
    mode = _pick(cfg.kxx_mode, prob, "kxx_mode")
    eps_x = _pick(cfg.eps_x, prob, "eps_x")
    if eps_x is None:
        probe = qcqp_margin(p, 1e-9, pre, mode)
        eps_x = probe.eps_x_max * (1.0 - cfg.shrink_tau)
    rep = qcqp_margin(p, float(eps_x), pre, mode)
    res.body["margin"] = rep.to_dict()
    res.body["x0"] = p.x0.tolist()
    res.cert = margin_certificate(p, rep, cfg.shrink_tau)
    if cfg.sweep:
        _, grid = parse_sweep(cfg.sweep)
        got = dict(margin_curve(p, grid, pre, mode))
        res.curve = (("eps_x", "r_u"), [(e, got.get(e)) for e in grid])


def run_powerflow(cfg: RunConfig, prob, res: _Result):
    from .powerflow import find_case_file, load_case, pf_margin_row
    from .qcqp import qcqp_map

    name = _pick(cfg.case, prob, "case")
    if name is None:
        raise ValueError("powerflow needs --case")
    case = load_case(find_case_file(name))
    restrict = cfg.restrict_u if cfg.restrict_u and cfg.restrict_u > 0 else None
    row, cert, pf = pf_margin_row(case, restrict, cfg.kxx_mode or "abssum", cfg.slack_voltage, tau=cfg.shrink_tau)
    res.method = Method.DIRECTIONAL
    res.oracle = qcqp_map(pf.qcqp)
    res.cert = cert
    res.body["row"] = row.to_dict()
    res.curve = (row.COLUMNS, [row.values()])


def run_riccati(cfg: RunConfig, prob, res: _Result):
    from .riccati import are_certificate, are_oracle, are_robust_region

    p = load_are(prob)
    conv = _pick(None, prob, "convention", cfg.convention)
    reg = are_robust_region(p, conv, cfg.shrink_tau)
    best = reg.best()
    rho_P = _pick(cfg.rho_p, prob, "rho_P", best[1])
    res.method = Method.IMFT_C1
    res.oracle = are_oracle(p, conv)
    res.body["region"] = reg.to_dict()
    res.body["best"] = {"rho_A": best[0], "rho_P": best[1]}
    res.body["P0"] = p.P0.tolist()
    res.body["max_rho_A"] = reg.max_rho_A(float(rho_P))
    res.cert = are_certificate(p, float(rho_P), conv, cfg.shrink_tau)
    res.curve = (("rho_A", "rho_P"), reg.frontier())


def _fblin_problem(prob):
    from .fblin import FblinProblem, example_problem

    if prob.get("example", False):
        return example_problem()
    return FblinProblem(build_map(prob["phi"]), build_map(prob["w"]), np.asarray(prob["A"], float),
                        np.asarray(prob["B"], float), _arr(prob["xstar"]), _arr(prob["ustar"]),
                        R=float(prob.get("R", 1.0)))


def run_fblin(cfg: RunConfig, prob, res: _Result):
    from .fblin import control_domain, linearization_domain

    p = _fblin_problem(prob)
    res.method = Method.IMFT_C1
    res.oracle = p.W
    rho_x = float(_pick(cfg.rho_x, prob, "rho_x", 0.2))
    rho_u = float(_pick(cfg.rho_u, prob, "rho_u", 0.5))
    rho_z = _pick(cfg.rho_z, prob, "rho_z")
    dom = linearization_domain(p, rho_x, rho_u, rho_z, cfg.shrink_tau)
    res.body["domain"] = dom.to_dict()
    res.cert = dom.control
    if cfg.sweep:
        _, grid = parse_sweep(cfg.sweep)
        rows = []
        for e in grid:
            try:
                rows.append((e, control_domain(p, e, rho_u, cfg.shrink_tau).constants["ratio"]))
            except EMPTY_REGION:
                rows.append((e, None))
        res.curve = (("eps_x", "eps_v_over_eps_u"), rows)


def oracle_for(command, prob, config):
    """Rebuild the oracle a stored report was computed from."""
    cfg = RunConfig(**{k: v for k, v in config.items() if k in {f.name for f in fields(RunConfig)}})
    res = _Result(None)
    RUNNERS[command](cfg, prob, res)
    return res.oracle


def run_verify(cfg: RunConfig, prob, res: _Result):
    """prob is a report written by another command."""
    from .verify import certificate_verify

    inner = prob["config"]["command"]
    cert = BoundCertificate.from_dict(prob["certificate"])
    oracle = oracle_for(inner, prob.get("problem", {}), prob["config"])
    res.method = cert.method
    res.cert = cert
    res.oracle = oracle
    rep = certificate_verify(cert, oracle, cfg.x_samples, cfg.seeds, cfg.seed)
    res.body["verification"] = rep.to_dict()
    res.body["source_command"] = inner


RUNNERS = {"imft": run_imft, "ift": run_ift, "qcqp": run_qcqp, "powerflow": run_powerflow,
           "riccati": run_riccati, "fblin": run_fblin, "verify": run_verify}


# -- orchestration --------------------------------------------------------------------


def run(cfg: RunConfig, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        prob = _load_json(cfg.input) if cfg.input is not None or cfg.command != "powerflow" else {}
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=stderr)
        return 1
    res = _Result(Method.IMFT_C2)
    code = 0
    try:
        RUNNERS[cfg.command](cfg, prob, res)
    except EMPTY_REGION as exc:
        res.cert = BoundCertificate.empty_for(res.method or Method.IMFT_C2, str(exc), cfg.normspec)
        res.body["error"] = {"type": type(exc).__name__, "message": str(exc)}
        code = 2
    except (ImftError, OSError, ValueError, KeyError, TypeError) as exc:
        kind = type(exc).__name__
        print(f"error: {kind}: {exc}", file=stderr)
        return 1
    report = {"config": asdict(cfg), "command": cfg.command, **res.body}
    if cfg.command != "verify":
        report["problem"] = prob
    if res.cert is not None:
        report["certificate"] = res.cert.to_dict()
    if cfg.verify and code == 0 and cfg.command != "verify":
        from .verify import certificate_verify

        rep = certificate_verify(res.cert, res.oracle, cfg.x_samples, cfg.seeds, cfg.seed)
        report["verification"] = rep.to_dict()
    ver = report.get("verification")
    if code == 0 and ver is not None and not ver["passed"]:
        code = 3
    text = dumps(report)
    if cfg.output:
        Path(cfg.output).write_text(text, encoding="utf-8")
    else:
        stdout.write(text)
    if cfg.csv and res.curve is not None:
        write_csv(cfg.csv, *res.curve)
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="imftbounds", description="Certified implicit/inverse function bounds.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--input", "-i")
        sp.add_argument("--output", "-o")
        sp.add_argument("--csv")
        sp.add_argument("--norm", default="inf", choices=["inf", "two"])
        sp.add_argument("--tau", dest="shrink_tau", type=float, default=DEFAULT_TAU)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--verify", action="store_true")
        sp.add_argument("--x-samples", type=int, default=500)
        sp.add_argument("--seeds", type=int, default=20)
        if name in ("imft", "ift", "qcqp", "fblin"):
            sp.add_argument("--sweep", help="eps_x:a:b:n")
        if name in ("imft", "ift"):
            sp.add_argument("--method", choices=[m.value for m in Method])
            sp.add_argument("--objective")
            sp.add_argument("--eps-y", type=float)
        if name in ("imft", "ift", "qcqp"):
            sp.add_argument("--eps-x", type=float)
        if name == "qcqp":
            sp.add_argument("--preconditioned", action="store_true")
            sp.add_argument("--kxx-mode", choices=["abssum", "spectral", "exact"])
        if name == "powerflow":
            sp.add_argument("--case")
            sp.add_argument("--restrict-u", type=int, default=5)
            sp.add_argument("--slack-voltage", default="setpoint", choices=["setpoint", "unity"])
            sp.add_argument("--kxx-mode", choices=["abssum", "exact"])
        if name == "riccati":
            sp.add_argument("--convention", default="trace", choices=["trace", "entrywise", "frobenius"])
            sp.add_argument("--rho-p", type=float)
        if name == "fblin":
            sp.add_argument("--rho-x", type=float)
            sp.add_argument("--rho-u", type=float)
            sp.add_argument("--rho-z", type=float)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    known = {f.name for f in fields(RunConfig)}
    try:
        cfg = RunConfig(**{k: v for k, v in vars(args).items() if k in known})
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

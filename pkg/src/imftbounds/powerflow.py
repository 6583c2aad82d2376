"""AC power flow as a quadratic system, and robustness margin rows.

Case files use the MATPOWER text layout; only baseMVA and the bus, gen and
branch tables are read. Voltages are written in rectangular coordinates
x = [Re V, Im V] over the non-slack buses (ascending bus id). Equation rows
are ordered: real power for every non-slack bus, then reactive power for PQ
buses, then squared voltage magnitude for PV buses, each block by ascending
bus id. The slack bus is eliminated with its voltage held at the generator
setpoint Vg + j0 (see `build_pf_qcqp` for the unity alternative).
"""

from __future__ import annotations

import json
import logging
import math
import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .bounds import DEFAULT_TAU, BoundCertificate, Method, SubspaceSpec, directional_certify
from .errors import NoConvergence, ParseError, Singular, ValidationError, ZeroImpedanceBranch
from .linalg import NormSpec, inverse, op_norm, solve_linear, vec_norm
from .qcqp import QcqpProblem, F, kxx_pair, qcqp_jacobian, qcqp_map

log = logging.getLogger(__name__)

SLACK, PQ, PV, ISOLATED = 3, 1, 2, 4
BUS_MIN_COLS, GEN_MIN_COLS, BRANCH_MIN_COLS = 6, 6, 5


@dataclass
class Bus:
    id: int
    type: int
    pd: float
    qd: float
    gs: float = 0.0
    bs: float = 0.0
    vm: float = 1.0
    va: float = 0.0


@dataclass
class Gen:
    bus: int
    pg: float
    qg: float
    vg: float = 1.0
    status: int = 1


@dataclass
class Branch:
    f: int
    t: int
    r: float
    x: float
    b: float = 0.0
    ratio: float = 0.0
    angle: float = 0.0
    status: int = 1


@dataclass
class PowerCase:
    base_mva: float
    buses: List[Bus]
    gens: List[Gen]
    branches: List[Branch]
    name: str = "case"

    def __post_init__(self):
        validate_case(self)

    @property
    def bus_ids(self):
        return [b.id for b in self.buses]

    @property
    def slack(self) -> Bus:
        return next(b for b in self.buses if b.type == SLACK)

    def gens_at(self, bus_id):
        return [g for g in self.gens if g.bus == bus_id and g.status > 0]


def validate_case(c: PowerCase):
    ids = [b.id for b in c.buses]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate bus ids")
    if not c.base_mva > 0:
        raise ValidationError("baseMVA must be positive")
    slacks = [b for b in c.buses if b.type == SLACK]
    if len(slacks) != 1:
        raise ValidationError(f"expected exactly one slack bus, found {len(slacks)}")
    for b in c.buses:
        if b.type not in (SLACK, PQ, PV):
            raise ValidationError(f"bus {b.id}: unsupported type {b.type}")
    known = set(ids)
    for br in c.branches:
        if br.f not in known or br.t not in known:
            raise ValidationError(f"branch {br.f}-{br.t} references a missing bus")
        if br.angle != 0.0:
            raise ValidationError(f"branch {br.f}-{br.t}: phase shifters are not supported")
    for g in c.gens:
        if g.bus not in known:
            raise ValidationError(f"generator at missing bus {g.bus}")
    adj = {i: set() for i in ids}
    for br in c.branches:
        if br.status > 0:
            adj[br.f].add(br.t)
            adj[br.t].add(br.f)
    seen = {ids[0]} if ids else set()
    todo = deque(seen)
    while todo:
        for j in adj[todo.popleft()] - seen:
            seen.add(j)
            todo.append(j)
    if len(seen) != len(ids):
        raise ValidationError("network is not connected")


# -- parsing -----------------------------------------------------------------

_FIELD = re.compile(r"^\s*mpc\.(\w+)\s*=\s*(.*)$")
_KNOWN = {"bus", "gen", "branch"}


def _strip_comment(line: str) -> str:
    return line.split("%", 1)[0]


def _parse_row(text: str, lineno: int):
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ParseError(lineno, f"non-numeric entry in {text.strip()!r}") from None


def _read_tables(text: str):
    lines = text.splitlines()
    tables = {}
    scalars = {}
    i = 0
    while i < len(lines):
        raw = _strip_comment(lines[i])
        m = _FIELD.match(raw)
        if not m:
            i += 1
            continue
        name, rest = m.group(1), m.group(2).strip()
        start = i + 1
        if rest.startswith("[") or rest.startswith("{"):
            close = "]" if rest[0] == "[" else "}"
            body = rest[1:]
            rows = []
            chunks = [(start, body)]
            while close not in body:
                i += 1
                if i >= len(lines):
                    raise ParseError(start, f"table mpc.{name} is not terminated")
                body = _strip_comment(lines[i])
                chunks.append((i + 1, body))
            if name in _KNOWN:
                for lineno, chunk in chunks:
                    chunk = chunk.split(close, 1)[0]
                    for piece in chunk.split(";"):
                        if piece.strip():
                            rows.append((lineno, _parse_row(piece, lineno)))
                tables[name] = (start, rows)
            else:
                log.warning("skipping field mpc.%s", name)
        elif name == "baseMVA":
            val = rest.rstrip(";").strip()
            try:
                scalars[name] = float(val)
            except ValueError:
                raise ParseError(start, f"bad baseMVA value {val!r}") from None
        else:
            log.warning("skipping field mpc.%s", name)
        i += 1
    return scalars, tables


def _rows_to_objects(tables, start_default=0):
    out = {}
    widths = {"bus": BUS_MIN_COLS, "gen": GEN_MIN_COLS, "branch": BRANCH_MIN_COLS}
    for name in _KNOWN:
        if name not in tables:
            if name == "branch":
                out[name] = []
                continue
            raise ParseError(start_default, f"missing table mpc.{name}")
        _, rows = tables[name]
        for lineno, r in rows:
            if len(r) < widths[name]:
                raise ParseError(lineno, f"mpc.{name} row has {len(r)} columns, need {widths[name]}")
        out[name] = rows
    at = lambda r, k, d: r[k] if len(r) > k else d
    buses = [Bus(int(r[0]), int(r[1]), r[2], r[3], r[4], r[5], at(r, 7, 1.0), at(r, 8, 0.0)) for _, r in out["bus"]]
    gens = [Gen(int(r[0]), r[1], r[2], r[5], int(at(r, 7, 1))) for _, r in out["gen"]]
    branches = [Branch(int(r[0]), int(r[1]), r[2], r[3], r[4], at(r, 8, 0.0), at(r, 9, 0.0), int(at(r, 10, 1)))
                for _, r in out["branch"]]
    return buses, gens, branches


def parse_case(text: str, name: str = "case") -> PowerCase:
    """Parse MATPOWER-style case text (or its JSON transliteration)."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        d = json.loads(text)
        tables = {k: (0, [(0, [float(v) for v in row]) for row in d.get(k, [])]) for k in _KNOWN if k in d}
        if "baseMVA" not in d:
            raise ParseError(0, "missing baseMVA")
        base = float(d["baseMVA"])
    else:
        scalars, tables = _read_tables(text)
        if "baseMVA" not in scalars:
            raise ParseError(0, "missing mpc.baseMVA")
        base = scalars["baseMVA"]
    buses, gens, branches = _rows_to_objects(tables)
    return PowerCase(base, buses, gens, branches, name)


def load_case(path) -> PowerCase:
    path = Path(path)
    return parse_case(path.read_text(), name=path.stem)


def format_case(c: PowerCase) -> str:
    """Serialize the subset fields back to case text."""
    out = [f"function mpc = {c.name}", "mpc.version = '2';", f"mpc.baseMVA = {c.base_mva!r};", "", "mpc.bus = ["]
    for b in c.buses:
        out.append("\t" + "\t".join(map(repr, [b.id, b.type, b.pd, b.qd, b.gs, b.bs, 1, b.vm, b.va])) + ";")
    out += ["];", "", "mpc.gen = ["]
    for g in c.gens:
        out.append("\t" + "\t".join(map(repr, [g.bus, g.pg, g.qg, 0.0, 0.0, g.vg, c.base_mva, g.status])) + ";")
    out += ["];", "", "mpc.branch = ["]
    for br in c.branches:
        out.append("\t" + "\t".join(map(repr, [br.f, br.t, br.r, br.x, br.b, 0.0, 0.0, 0.0, br.ratio, br.angle, br.status])) + ";")
    out += ["];", ""]
    return "\n".join(out)


def find_case_file(name: str) -> Path:
    """Locate a case by path, or by name in an installed MATPOWER data directory."""
    p = Path(name)
    if p.exists():
        return p
    stem = p.name if p.suffix == ".m" else p.name + ".m"
    try:
        import matpower  # noqa: F401  (data files ship with the pip package)

        cand = Path(matpower.__file__).parent / "data" / stem
        if cand.exists():
            return cand
    except ImportError:
        pass
    raise FileNotFoundError(f"case file {name!r} not found")


# -- admittance ---------------------------------------------------------------------


def build_ybus(c: PowerCase):
    """(G, B) with Y = G + jB, in bus order of the case."""
    idx = {b.id: i for i, b in enumerate(c.buses)}
    nb = len(c.buses)
    Y = np.zeros((nb, nb), dtype=complex)
    for br in c.branches:
        if br.status <= 0:
            continue
        z = complex(br.r, br.x)
        if z == 0:
            raise ZeroImpedanceBranch(f"branch {br.f}-{br.t} has zero impedance")
        ys = 1.0 / z
        tap = br.ratio if br.ratio else 1.0
        f, t = idx[br.f], idx[br.t]
        Y[f, f] += (ys + 0.5j * br.b) / tap ** 2
        Y[t, t] += ys + 0.5j * br.b
        Y[f, t] -= ys / tap
        Y[t, f] -= ys / tap
    for i, b in enumerate(c.buses):
        Y[i, i] += complex(b.gs, b.bs) / c.base_mva
    return Y.real.copy(), Y.imag.copy()


# -- quadratic form ----------------------------------------------------------------


@dataclass
class PfQcqp:
    qcqp: QcqpProblem
    case: PowerCase
    nonslack: list
    pv: list
    pq: list
    row_labels: list
    x_labels: list
    slack_id: int
    V0: float

    def rows_of(self, bus_id):
        return [k for k, lab in enumerate(self.row_labels) if int(lab[1:]) == bus_id]

    def voltages(self, x) -> np.ndarray:
        """Complex voltages of all buses, in case bus order."""
        n = len(self.nonslack)
        pos = {b: a for a, b in enumerate(self.nonslack)}
        V = np.empty(len(self.case.buses), dtype=complex)
        for i, b in enumerate(self.case.buses):
            V[i] = self.V0 if b.id == self.slack_id else complex(x[pos[b.id]], x[n + pos[b.id]])
        return V


def _bus_kinds(c: PowerCase):
    pv, pq = [], []
    for b in sorted(c.buses, key=lambda b: b.id):
        if b.type == SLACK:
            continue
        (pv if b.type == PV and c.gens_at(b.id) else pq).append(b.id)
    return pv, pq


def build_pf_qcqp(c: PowerCase, slack_voltage: str = "setpoint") -> PfQcqp:
    """Quadratic power-flow system F(x) = u0.

    slack_voltage="setpoint" holds the slack at its generator setpoint;
    "unity" holds it at 1 + j0.
    """
    G, B = build_ybus(c)
    idx = {b.id: i for i, b in enumerate(c.buses)}
    slack = c.slack
    pv, pq = _bus_kinds(c)
    nonslack = sorted(pv + pq)
    n = len(nonslack)
    pos = {bid: a for a, bid in enumerate(nonslack)}
    if slack_voltage == "setpoint":
        gs = c.gens_at(slack.id)
        V0 = gs[0].vg if gs else slack.vm
    elif slack_voltage == "unity":
        V0 = 1.0
    else:
        raise ValueError(f"unknown slack convention {slack_voltage!r}")
    s = idx[slack.id]

    def forms(bid):
        i, a = idx[bid], pos[bid]
        QP = np.zeros((2 * n, 2 * n))
        QQ = np.zeros((2 * n, 2 * n))
        lP = np.zeros(2 * n)
        lQ = np.zeros(2 * n)
        for kid in nonslack:
            k, kk = idx[kid], pos[kid]
            g, bb = G[i, k], B[i, k]
            # P_i = e_i (G e - B f)_i + f_i (G f + B e)_i
            QP[a, kk] += g
            QP[a, n + kk] -= bb
            QP[n + a, n + kk] += g
            QP[n + a, kk] += bb
            # Q_i = f_i (G e - B f)_i - e_i (G f + B e)_i
            QQ[n + a, kk] += g
            QQ[n + a, n + kk] -= bb
            QQ[a, n + kk] -= g
            QQ[a, kk] -= bb
        g, bb = G[i, s], B[i, s]
        lP[a] += g * V0
        lP[n + a] += bb * V0
        lQ[n + a] += g * V0
        lQ[a] -= bb * V0
        return 0.5 * (QP + QP.T), 0.5 * (QQ + QQ.T), lP, lQ

    inj = {}
    for b in c.buses:
        gens = c.gens_at(b.id)
        inj[b.id] = ((sum(g.pg for g in gens) - b.pd) / c.base_mva, (sum(g.qg for g in gens) - b.qd) / c.base_mva,
                     gens[0].vg if gens else b.vm)
    Qs, Ls, us, labels = [], [], [], []
    cache = {bid: forms(bid) for bid in nonslack}
    for bid in nonslack:
        Qs.append(cache[bid][0])
        Ls.append(cache[bid][2])
        us.append(inj[bid][0])
        labels.append(f"P{bid}")
    for bid in pq:
        Qs.append(cache[bid][1])
        Ls.append(cache[bid][3])
        us.append(inj[bid][1])
        labels.append(f"Q{bid}")
    for bid in pv:
        a = pos[bid]
        Qv = np.zeros((2 * n, 2 * n))
        Qv[a, a] = Qv[n + a, n + a] = 1.0
        Qs.append(Qv)
        Ls.append(np.zeros(2 * n))
        us.append(inj[bid][2] ** 2)
        labels.append(f"V{bid}")
    p = QcqpProblem(2 * n, np.array(Qs), np.array(Ls), np.zeros((0, 2 * n)), np.zeros(0), np.array(us))
    x_labels = [f"e{b}" for b in nonslack] + [f"f{b}" for b in nonslack]
    return PfQcqp(p, c, nonslack, pv, pq, labels, x_labels, slack.id, V0)


def case_profile(pf: PfQcqp) -> np.ndarray:
    """x from the Vm/Va columns of the case (a solved profile if shipped)."""
    n = len(pf.nonslack)
    x = np.zeros(2 * n)
    by_id = {b.id: b for b in pf.case.buses}
    for a, bid in enumerate(pf.nonslack):
        b = by_id[bid]
        v = b.vm * np.exp(1j * math.radians(b.va))
        x[a], x[n + a] = v.real, v.imag
    return x


def solve_power_flow(pf: PfQcqp, tol: float = 1e-9, maxiter: int = 50) -> np.ndarray:
    """Newton from flat start on F(x) = u0."""
    p = pf.qcqp
    n = len(pf.nonslack)
    x = np.concatenate([np.ones(n), np.zeros(n)])
    for _ in range(maxiter):
        r = F(p, x) - p.u0
        if vec_norm(r) <= tol:
            return x
        try:
            x = x - solve_linear(qcqp_jacobian(p, x), r)
        except Singular as exc:
            raise NoConvergence(str(exc)) from exc
        if not np.all(np.isfinite(x)):
            break
    r = F(p, x) - p.u0
    if vec_norm(r) <= tol:
        return x
    raise NoConvergence(f"power flow did not converge (residual {vec_norm(r):.2e})")


def bus_injections(pf: PfQcqp, x) -> np.ndarray:
    """Complex power injections S = V conj(Y V) of all buses, in p.u."""
    G, B = build_ybus(pf.case)
    V = pf.voltages(x)
    return V * np.conj((G + 1j * B) @ V)


def network_losses(pf: PfQcqp, x) -> float:
    """Real losses from branch flows and bus shunts, computed per element."""
    c = pf.case
    V = pf.voltages(x)
    idx = {b.id: i for i, b in enumerate(c.buses)}
    loss = 0.0
    for br in c.branches:
        if br.status <= 0:
            continue
        ys = 1.0 / complex(br.r, br.x)
        tap = br.ratio if br.ratio else 1.0
        vf, vt = V[idx[br.f]], V[idx[br.t]]
        i_ft = (ys + 0.5j * br.b) / tap ** 2 * vf - ys / tap * vt
        i_tf = (ys + 0.5j * br.b) * vt - ys / tap * vf
        loss += (vf * np.conj(i_ft) + vt * np.conj(i_tf)).real
    for i, b in enumerate(c.buses):
        loss += b.gs / c.base_mva * abs(V[i]) ** 2
    return float(loss)


def power_balance_residual(pf: PfQcqp, x) -> float:
    """Sum of generation minus load minus losses, with slack output from the flow."""
    c = pf.case
    S = bus_injections(pf, x)
    slack_i = [b.id for b in c.buses].index(pf.slack_id)
    slack = c.slack
    p_slack_gen = S[slack_i].real + slack.pd / c.base_mva
    gen = p_slack_gen + sum(g.pg for g in c.gens if g.status > 0 and g.bus != pf.slack_id) / c.base_mva
    load = sum(b.pd for b in c.buses) / c.base_mva
    return float(gen - load - network_losses(pf, x))


# -- margin rows -----------------------------------------------------------------


@dataclass
class PfMarginRow:
    case: str
    n_bus: int
    M_F: float
    M_F_prime: float
    K_Fbar: float
    max_eps_x: float
    max_r_u: float
    restrict_first_k_u: Optional[int] = None
    kxx_mode: str = "abssum"
    slack_voltage: str = "setpoint"
    notes: dict = field(default_factory=dict)

    COLUMNS = ("case", "n_bus", "M_F", "M_F_prime", "K_Fbar", "max_eps_x", "max_r_u")

    def values(self):
        return [getattr(self, k) for k in self.COLUMNS]

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.COLUMNS}
        d.update(restrict_first_k_u=self.restrict_first_k_u, kxx_mode=self.kxx_mode,
                 slack_voltage=self.slack_voltage, notes=self.notes)
        return d


def pf_margin_row(c: PowerCase, restrict_first_k_u: Optional[int] = 5, kxx_mode: str = "abssum",
                  slack_voltage: str = "setpoint", voltage_tol: float = 1.0, tau: float = DEFAULT_TAU):
    """Table row and a directional certificate for the preconditioned system.

    The preconditioned map is DF(x0)^-1 F, so its Jacobian inverse has norm 1
    and K_Fbar is computed from the transformed quadratics. eps_x is capped
    by the voltage tolerance ball, whose radius must be below 1.
    """
    if not 0 < voltage_tol <= 1:
        raise ValueError("voltage tolerance must lie in (0, 1]")
    pf = build_pf_qcqp(c, slack_voltage)
    p = pf.qcqp
    x0 = solve_power_flow(pf)
    p.x0 = x0
    dim = p.n
    k = dim if restrict_first_k_u is None else min(int(restrict_first_k_u), dim)
    W = SubspaceSpec.coords(range(k))
    oracle = qcqp_map(p, kxx_mode)
    plain = directional_certify(oracle, x0, R=voltage_tol, W=W, tau=tau)
    Jinv = inverse(qcqp_jacobian(p, x0))
    M_F = op_norm(Jinv)
    M_W = plain.constants["M_W"]
    Qbar = np.einsum("il,ljk->ijk", Jinv, p.Qi)
    K_bar = max(kxx_pair(Qbar, kxx_mode))
    eps_sup = min(1.0 / K_bar, voltage_tol) if K_bar > 0 else voltage_tol
    r_sup = eps_sup * (2.0 - K_bar * eps_sup) / (2.0 * M_W)
    row = PfMarginRow(c.name, len(c.buses), M_F, M_W, K_bar, eps_sup, r_sup, restrict_first_k_u, kxx_mode, slack_voltage,
                      {"row_labels": pf.row_labels[:k], "x_labels": pf.x_labels})
    eps_x = eps_sup * (1.0 - tau)
    r_u = eps_x * (2.0 - K_bar * eps_x) / (2.0 * M_W) * (1.0 - tau)
    consts = {"M": 1.0, "K": K_bar, "M_W": M_W, "M_F": M_F, "r_W_sup": r_sup, "R": voltage_tol,
              "subspace": W.as_dict(), "preconditioned": True, "kxx_mode": kxx_mode}
    cert = BoundCertificate(Method.DIRECTIONAL, eps_x, r_u, True, consts, True, tau, NormSpec.INF,
                            x0.copy(), p.u0.copy(), None)
    return row, cert, pf

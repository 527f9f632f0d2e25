"""Minimum-cost probe routing as a linear program.

Measuring a target set of links needs probe flow delivered across each of
them in a pattern that keeps the link identifiable.  Conceptual flows (one
per target link) may share edges without contending for capacity; only the
total flow per edge is paid for.  The resulting LP is solved by a small
self-contained two-phase dense simplex, and models serialize to a canonical
text format that round-trips byte-identically.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .topology import Topology

MAX_VARIABLES = 2000
SUPER_SOURCE = "SRC*"
SUPER_SINK = "SNK*"


class RoutingError(ValueError):
    pass


class InfeasibleError(RoutingError):
    """Raised when phase one cannot zero out the artificial variables."""

    def __init__(self, residual: float, rows: list[str]):
        super().__init__(f"infeasible model (phase-1 residual {residual:.3g};"
                         f" unsatisfied rows: {', '.join(rows) or 'n/a'})")
        self.residual = residual
        self.rows = rows


@dataclass
class LpRow:
    name: str
    coeffs: dict[str, float]
    sense: str  # "<=", ">=", "="
    rhs: float


@dataclass
class LpModel:
    """min c.x subject to rows, x >= 0, with optional upper bounds."""

    name: str
    variables: list[str]
    objective: dict[str, float]
    rows: list[LpRow]
    upper: dict[str, float] = field(default_factory=dict)

    def check(self):
        declared = set(self.variables)
        for row in self.rows:
            unknown = set(row.coeffs) - declared
            if unknown:
                raise RoutingError(f"row {row.name} references undeclared {unknown}")
        if len(self.variables) > MAX_VARIABLES:
            raise RoutingError(f"{len(self.variables)} variables exceeds the "
                               f"desk-scale cap of {MAX_VARIABLES}")


# ---------------------------------------------------------------------------
# model construction
# ---------------------------------------------------------------------------

def _var_f(edge_id: str) -> str:
    return f"f_{edge_id}"


def _var_fc(target: str, edge_id: str) -> str:
    return f"fc_{target}__{edge_id}"


def build_min_cost_lp(topology: Topology, sources: list[str], receivers: list[str],
                      targets: list[str], rho: float = 1.0,
                      costs: dict[str, float] | None = None) -> LpModel:
    """The conceptual-flow LP for measuring the links in ``targets``.

    All source nodes hang off one super source and all receivers feed one
    super sink through free, effectively uncapacitated edges.  Real edges
    carry at most rho of total flow, target edges exactly rho.  Each target
    edge gets its own conceptual flow which must enter the tail at rate rho,
    leave the head at rate rho, meet the 3-rho endpoint throughput floors,
    be conserved elsewhere, and fit under the total flow everywhere else.
    """
    if not sources or not receivers:
        raise RoutingError("need at least one source and one receiver")
    edge_ids = [e.id for e in topology.edges]
    for t in targets:
        if t not in topology.edge_by_id:
            raise RoutingError(f"target edge {t!r} is not in the graph")
    costs = costs or {}

    aug_edges: list[tuple[str, str, str]] = [(e.id, e.tail, e.head) for e in topology.edges]
    aug_edges += [(f"src__{s}", SUPER_SOURCE, s) for s in sorted(set(sources))]
    aug_edges += [(f"snk__{r}", r, SUPER_SINK) for r in sorted(set(receivers))]
    real = set(edge_ids)
    cap = 10.0 * rho * max(1, len(targets))

    variables = [_var_f(eid) for eid, _u, _v in aug_edges]
    objective = {_var_f(eid): float(costs.get(eid, 1.0)) if eid in real else 0.0
                 for eid, _u, _v in aug_edges}
    rows: list[LpRow] = []
    upper: dict[str, float] = {}
    for eid, _u, _v in aug_edges:
        upper[_var_f(eid)] = rho if eid in real else cap
    for t in targets:
        rows.append(LpRow(f"pin_{t}", {_var_f(t): 1.0}, "=", rho))

    nodes = sorted({u for _e, u, _v in aug_edges} | {v for _e, _u, v in aug_edges})
    in_of: dict[str, list[str]] = {n: [] for n in nodes}
    out_of: dict[str, list[str]] = {n: [] for n in nodes}
    for eid, u, v in aug_edges:
        out_of[u].append(eid)
        in_of[v].append(eid)

    for t in targets:
        edge = topology.edge_by_id[t]
        u_t, v_t = edge.tail, edge.head
        for eid, _u, _v in aug_edges:
            fc = _var_fc(t, eid)
            variables.append(fc)
            upper[fc] = cap
            if eid == t:
                rows.append(LpRow(f"own_{t}", {fc: 1.0}, "=", rho))
            else:
                rows.append(LpRow(f"cap_{t}_{eid}", {fc: 1.0, _var_f(eid): -1.0},
                                  "<=", 0.0))
        # zero inflow at the super source and zero outflow at the super sink
        # hold structurally: the augmentation creates no such edges
        for n in nodes:
            if n in (SUPER_SOURCE, SUPER_SINK, u_t, v_t):
                continue
            coeffs = {_var_fc(t, e): 1.0 for e in in_of[n]}
            for e in out_of[n]:
                coeffs[_var_fc(t, e)] = coeffs.get(_var_fc(t, e), 0.0) - 1.0
            if coeffs:
                rows.append(LpRow(f"bal_{t}_{n}", coeffs, "=", 0.0))
        rows.append(LpRow(f"tin_{t}", {_var_fc(t, e): 1.0 for e in in_of[u_t]},
                          ">=", rho))
        rows.append(LpRow(
            f"tthru_{t}",
            {_var_fc(t, e): 1.0 for e in in_of[u_t] + out_of[u_t]}, ">=", 3.0 * rho))
        rows.append(LpRow(f"hout_{t}", {_var_fc(t, e): 1.0 for e in out_of[v_t]},
                          ">=", rho))
        rows.append(LpRow(
            f"hthru_{t}",
            {_var_fc(t, e): 1.0 for e in in_of[v_t] + out_of[v_t]}, ">=", 3.0 * rho))

    model = LpModel("min_cost_probe_routing", variables, objective, rows, upper)
    model.check()
    return model


# ---------------------------------------------------------------------------
# two-phase dense simplex (Bland's rule)
# ---------------------------------------------------------------------------

@dataclass
class LpSolution:
    objective: float
    values: dict[str, float]
    max_residual: float
    iterations: int


def _standard_form(model: LpModel) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[str]]:
    """Rows + upper bounds to equality form A x = b, x >= 0 with slacks."""
    var_idx = {v: i for i, v in enumerate(model.variables)}
    n = len(model.variables)
    rows = list(model.rows)
    senses = [r.sense for r in rows]
    for v, ub in model.upper.items():
        rows.append(LpRow(f"ub_{v}", {v: 1.0}, "<=", ub))
        senses.append("<=")
    m = len(rows)
    n_slack = sum(1 for r in rows if r.sense in ("<=", ">="))
    a = np.zeros((m, n + n_slack))
    b = np.zeros(m)
    slack = n
    for i, row in enumerate(rows):
        for v, c in row.coeffs.items():
            a[i, var_idx[v]] = c
        b[i] = row.rhs
        if row.sense == "<=":
            a[i, slack] = 1.0
            slack += 1
        elif row.sense == ">=":
            a[i, slack] = -1.0
            slack += 1
    neg = b < 0
    a[neg] *= -1.0
    b[neg] *= -1.0
    c = np.zeros(n + n_slack)
    for v, coef in model.objective.items():
        c[var_idx[v]] = coef
    return a, b, c, [r.name for r in rows]


def _simplex(a: np.ndarray, b: np.ndarray, c: np.ndarray, basis: list[int],
             tol: float) -> tuple[np.ndarray, list[int], int]:
    """Primal simplex on a tableau already in canonical form for ``basis``.

    Bland's smallest-index rule keeps it free of cycling; fine for the
    desk-scale models this module accepts.
    """
    m, _n = a.shape
    it = 0
    while True:
        it += 1
        if it > 50000:
            raise RoutingError("simplex iteration limit hit")
        cb = c[basis]
        y = cb @ a
        reduced = c - y
        reduced[basis] = 0.0
        enter_candidates = np.flatnonzero(reduced < -tol)
        if len(enter_candidates) == 0:
            return b, basis, it
        enter = int(enter_candidates[0])  # Bland
        col = a[:, enter]
        pos = col > tol
        if not pos.any():
            raise RoutingError("unbounded linear program")
        ratios = np.full(m, np.inf)
        ratios[pos] = b[pos] / col[pos]
        best = ratios.min()
        leave_candidates = np.flatnonzero(np.isclose(ratios, best, rtol=0.0, atol=tol))
        leave = int(min(leave_candidates, key=lambda i: basis[i]))  # Bland
        pivot = a[leave, enter]
        a[leave] /= pivot
        b[leave] /= pivot
        for i in range(m):
            if i != leave and abs(a[i, enter]) > 0:
                b[i] -= a[i, enter] * b[leave]
                a[i] -= a[i, enter] * a[leave]
        basis[leave] = enter


def solve_lp(model: LpModel, tolerance: float = 1e-7) -> LpSolution:
    """Optimal basic solution by two-phase dense simplex.

    Raises :class:`InfeasibleError` with the offending row names when phase
    one cannot reach zero; verifies the returned point against every row to
    ``tolerance``.
    """
    model.check()
    a, b, c, row_names = _standard_form(model)
    m, n_total = a.shape
    # phase 1: minimize artificials
    art = np.eye(m)
    a1 = np.hstack([a, art])
    c1 = np.concatenate([np.zeros(n_total), np.ones(m)])
    basis = list(range(n_total, n_total + m))
    b1 = b.copy()
    # canonicalize phase-1 objective
    b1, basis, it1 = _simplex(a1, b1, c1, basis, 1e-9)
    phase1 = float(c1[basis] @ b1)
    if phase1 > 1e-7:
        bad = []
        for pos, var in enumerate(basis):
            if var >= n_total and b1[pos] > 1e-7:
                bad.append(row_names[var - n_total])
        raise InfeasibleError(phase1, bad)
    # drive leftover artificials out of the basis where possible
    for pos, var in enumerate(basis):
        if var >= n_total:
            row = a1[pos, :n_total]
            cand = np.flatnonzero(np.abs(row) > 1e-9)
            if len(cand):
                enter = int(cand[0])
                pivot = a1[pos, enter]
                a1[pos] /= pivot
                b1[pos] /= pivot
                for i in range(m):
                    if i != pos and abs(a1[i, enter]) > 0:
                        b1[i] -= a1[i, enter] * b1[pos]
                        a1[i] -= a1[i, enter] * a1[pos]
                basis[pos] = enter
    # rows still pinned to an artificial are redundant (their rhs is zero)
    kept = [pos for pos, var in enumerate(basis) if var < n_total]
    keep = a1[np.ix_(kept, range(n_total))]
    b1 = b1[kept]
    basis = [basis[pos] for pos in kept]
    b2, basis, it2 = _simplex(keep, b1, c.copy(), basis, 1e-9)

    x = np.zeros(n_total)
    for pos, var in enumerate(basis):
        if var < n_total:
            x[var] = b2[pos]
    values = {v: float(x[i]) for i, v in enumerate(model.variables)}
    objective = float(sum(model.objective.get(v, 0.0) * values[v]
                          for v in model.variables))
    residual = _max_residual(model, values)
    if residual > tolerance:
        raise RoutingError(f"solution violates constraints (residual {residual:.3g})")
    return LpSolution(objective, values, residual, it1 + it2)


def _max_residual(model: LpModel, values: dict[str, float]) -> float:
    worst = 0.0
    for row in model.rows:
        lhs = sum(c * values[v] for v, c in row.coeffs.items())
        if row.sense == "<=":
            worst = max(worst, lhs - row.rhs)
        elif row.sense == ">=":
            worst = max(worst, row.rhs - lhs)
        else:
            worst = max(worst, abs(lhs - row.rhs))
    for v, ub in model.upper.items():
        worst = max(worst, values[v] - ub, -values[v])
    return worst


# ---------------------------------------------------------------------------
# canonical text serialization
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def serialize_lp(model: LpModel) -> str:
    """Canonical LP text: stable ordering, shortest round-trip floats, so
    serialize(parse(serialize(m))) is byte-identical to serialize(m)."""
    ordered = sorted(model.variables)
    out = [f"\\ lp {model.name}", "Minimize", " obj:"]
    terms = [f"  + {_fmt(model.objective.get(v, 0.0))} {v}" for v in ordered
             if model.objective.get(v, 0.0) != 0.0]
    out.extend(terms)
    out.append("Subject To")
    for row in model.rows:
        out.append(f" {row.name}:")
        for v in ordered:
            if v in row.coeffs and row.coeffs[v] != 0.0:
                coef = row.coeffs[v]
                sign = "+" if coef >= 0 else "-"
                out.append(f"  {sign} {_fmt(abs(coef))} {v}")
        out.append(f"  {row.sense} {_fmt(row.rhs)}")
    out.append("Bounds")
    for v in ordered:
        if v in model.upper:
            out.append(f" 0 <= {v} <= {_fmt(model.upper[v])}")
        else:
            out.append(f" 0 <= {v}")
    out.append("End")
    return "\n".join(out) + "\n"


def parse_lp(text: str) -> LpModel:
    lines = [l for l in text.splitlines() if l.strip()]
    name = "parsed"
    if lines and lines[0].startswith("\\ lp "):
        name = lines[0][5:].strip()
        lines = lines[1:]
    section = None
    variables: list[str] = []
    seen: set[str] = set()
    objective: dict[str, float] = {}
    rows: list[LpRow] = []
    upper: dict[str, float] = {}
    cur_name = None
    cur_coeffs: dict[str, float] = {}

    def note_var(v: str):
        if v not in seen:
            seen.add(v)
            variables.append(v)

    term_re = re.compile(r"^([+-])\s+(\S+)\s+(\S+)$")
    bound_re = re.compile(r"^0\s+<=\s+(\S+)(?:\s+<=\s+(\S+))?$")
    for raw in lines:
        line = raw.strip()
        if line in ("Minimize", "Subject To", "Bounds", "End"):
            section = line
            continue
        if section == "Minimize":
            if line == "obj:":
                continue
            m = term_re.match(line)
            if not m:
                raise RoutingError(f"bad objective term: {raw!r}")
            sign, coef, var = m.groups()
            note_var(var)
            objective[var] = float(coef) * (1.0 if sign == "+" else -1.0)
        elif section == "Subject To":
            if line.endswith(":"):
                cur_name = line[:-1]
                cur_coeffs = {}
                continue
            m = term_re.match(line)
            if m:
                sign, coef, var = m.groups()
                note_var(var)
                cur_coeffs[var] = cur_coeffs.get(var, 0.0) + \
                    float(coef) * (1.0 if sign == "+" else -1.0)
                continue
            parts = line.split()
            if len(parts) == 2 and parts[0] in ("<=", ">=", "="):
                rows.append(LpRow(cur_name, cur_coeffs, parts[0], float(parts[1])))
                cur_name, cur_coeffs = None, {}
            else:
                raise RoutingError(f"bad constraint line: {raw!r}")
        elif section == "Bounds":
            m = bound_re.match(line)
            if not m:
                raise RoutingError(f"bad bound line: {raw!r}")
            var, ub = m.groups()
            note_var(var)
            if ub is not None:
                upper[var] = float(ub)
        elif section == "End":
            raise RoutingError(f"content after End: {raw!r}")
        else:
            raise RoutingError(f"content before Minimize: {raw!r}")
    return LpModel(name, variables, objective, rows, upper)


def flows_csv(model: LpModel, solution: LpSolution) -> str:
    """Per-edge totals and per-target conceptual flows."""
    f_vars = [v for v in model.variables if v.startswith("f_")]
    targets = sorted({v.split("__", 1)[0][3:] for v in model.variables
                      if v.startswith("fc_")})
    lines = ["edge,f" + "".join(f",fc_{t}" for t in targets)]
    for fv in f_vars:
        eid = fv[2:]
        row = [eid, repr(solution.values[fv])]
        for t in targets:
            row.append(repr(solution.values.get(_var_fc(t, eid), 0.0)))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"

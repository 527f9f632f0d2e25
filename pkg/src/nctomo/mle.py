"""Exact maximum-likelihood estimation of link success rates on trees.

The estimator works from per-link "proof-of-work" statistics: for a link, the
probability of the outcome set in which some probe demonstrably crossed it.
Each interior node then ties its adjacent statistics together through a
one-dimensional fixed point (the classic multicast-inference recursion, or
its mirror image at coding points), and every link rate falls out as a ratio.
On a multicast tree this is exactly the standard recursive MLE; on a reverse
multicast tree its mirror; on an hourglass tree (all probes merge into one
coded stream before fanning out) it reproduces the two-reduction algorithm;
and it remains an exact inverse of the outcome distribution on any directed
tree whose interior nodes are pure coding or branching points.

Also here: Fisher information (numeric and the five-link closed form),
asymptotic confidence intervals, and the MSE / log-MSE summary metrics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from .simulate import LossModel, Outcome, OutcomeHistogram, exact_distribution
from .topology import Configuration, Edge, Topology

CLAMP_EPS = 1e-9
FIXED_POINT_TOL = 1e-14
FIXED_POINT_MAX_ITER = 200


class EstimationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# gamma statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GammaEstimates:
    """Per-edge observed-crossing probabilities for a tree-mode configuration.

    ``edge_gamma[e]`` estimates the probability that some source probe
    crossing ``e`` is observed at some receiver behind ``e``.  The
    node-keyed views use the conventional naming on hourglass trees: a link
    above the merge point is named by its tail, one below by its head.
    """

    config: Configuration
    edge_gamma: dict[str, float]

    def __post_init__(self):
        for e, g in self.edge_gamma.items():
            if not -1e-12 <= g <= 1.0 + 1e-12:
                raise EstimationError(f"gamma for edge {e!r} outside [0, 1]: {g}")

    @property
    def gamma_r(self) -> dict[str, float]:
        """Link statistics keyed by tail node (defined where the tail has a
        single out-edge)."""
        t = self.config.topology
        return {n: self.edge_gamma[t.out_edges[n][0].id]
                for n in t.nodes if len(t.out_edges[n]) == 1}

    @property
    def gamma_m(self) -> dict[str, float]:
        """Link statistics keyed by head node (defined where the head has a
        single in-edge)."""
        t = self.config.topology
        return {n: self.edge_gamma[t.in_edges[n][0].id]
                for n in t.nodes if len(t.in_edges[n]) == 1}

    @property
    def gamma_cd(self) -> float:
        eid = self.config.full_flow_edge
        if eid is None:
            raise EstimationError("no full-flow link: configuration is not an hourglass")
        return self.edge_gamma[eid]


def _tree_observation(config: Configuration, outcome: Outcome) -> dict[str, int]:
    if outcome.mode != "tree":
        raise EstimationError("tree-mode estimators need tree-mode outcomes")
    obs = dict(outcome.entries)
    if set(obs) != set(config.receivers):
        raise EstimationError("histogram receivers do not match the configuration")
    return obs


def estimate_gammas(config: Configuration, hist: OutcomeHistogram) -> GammaEstimates:
    """Empirical crossing probabilities for every link.

    For link e, counts the outcomes in which a probe bit that can only have
    travelled through e shows up at a receiver reachable from e's head.
    """
    n = hist.n
    if n <= 0:
        raise EstimationError("empty histogram")
    totals = {e.id: 0.0 for e in config.topology.edges}
    crossing = {e.id: config.edge_crossing(e.id) for e in config.topology.edges}
    for outcome, c in hist.counts.items():
        obs = _tree_observation(config, outcome)
        for eid, (bits, rcvs) in crossing.items():
            seen = any(obs[r] >> b & 1 for r in rcvs for b in bits)
            if seen:
                totals[eid] += c
    return GammaEstimates(config, {e: v / n for e, v in totals.items()})


def analytic_gammas(config: Configuration, model: LossModel) -> GammaEstimates:
    """The infinite-sample gamma values implied by a loss model.

    gamma(e) = alpha_e * P[some probe reaches e's tail] * P[e's head would
    deliver to some receiver]; both factors follow a product recursion over
    the disjoint subtrees hanging off each node.
    """
    up = _reach_probability_up(config, model)
    down = _deliver_probability_down(config, model)
    gam = {}
    for e in config.topology.edges:
        gam[e.id] = model.alpha[e.id] * up[e.tail] * down[e.head]
    return GammaEstimates(config, gam)


def _reach_probability_up(config: Configuration, model: LossModel) -> dict[str, float]:
    t = config.topology
    up: dict[str, float] = {}
    for n in t.topological_order():
        if n in config.sources:
            up[n] = 1.0
            continue
        miss = 1.0
        for e in t.in_edges[n]:
            miss *= 1.0 - model.alpha[e.id] * up[e.tail]
        up[n] = 1.0 - miss
    return up


def _deliver_probability_down(config: Configuration, model: LossModel) -> dict[str, float]:
    t = config.topology
    down: dict[str, float] = {}
    for n in reversed(t.topological_order()):
        if n in config.receivers:
            down[n] = 1.0
            continue
        miss = 1.0
        for e in t.out_edges[n]:
            miss *= 1.0 - model.alpha[e.id] * down[e.head]
        down[n] = 1.0 - miss
    return down


# ---------------------------------------------------------------------------
# the one-dimensional node fixed point
# ---------------------------------------------------------------------------

def solve_node_fixed_point(gamma_node: float, member_gammas: list[float]
                           ) -> tuple[float, str | None, int]:
    """Solve 1 - gamma_node/x = prod_j (1 - gamma_j/x) for x > 0.

    Returns (x, flag, iterations).  The left side is the chance the node's
    aggregate succeeds, the right the chance every member branch fails; the
    residual is monotone, so bisection on [max gamma_j, inf) finds the unique
    root.  Consistent data keeps the root in (0, 1]; noisy samples may push
    it above 1, in which case the raw root is returned and downstream rate
    estimates get clamped, not the root itself.
    """
    members = [g for g in member_gammas if g > 0.0]
    if gamma_node <= 0.0 or not members:
        return math.nan, "degenerate", 0

    def g(x: float) -> float:
        prod = 1.0
        for gj in members:
            prod *= 1.0 - gj / x
        return x * (1.0 - prod) - gamma_node

    lo = max(members)
    if len(members) == 1:
        # one live branch: the equation collapses and the split is unidentified
        return lo, "degenerate", 0
    if gamma_node <= lo:
        # union event cannot be rarer than a member event; noisy ties land here
        return lo, "clamped" if gamma_node < lo else None, 0
    if gamma_node >= sum(members) - FIXED_POINT_TOL:
        # member events look disjoint; the root escapes to infinity
        return math.nan, "degenerate", 0
    hi = 1.0
    while g(hi) < 0.0:
        hi *= 2.0
        if hi > 1e12:
            return math.nan, "degenerate", 0
    it = 0
    for it in range(1, FIXED_POINT_MAX_ITER + 1):
        mid = 0.5 * (lo + hi)
        if g(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < FIXED_POINT_TOL:
            break
    return 0.5 * (lo + hi), None, it


def closed_form_pair(gamma_node: float, g1: float, g2: float) -> float:
    """Two-branch special case of the node fixed point."""
    return g1 * g2 / (g1 + g2 - gamma_node)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class EstimateReport:
    """Per-edge estimates plus solver bookkeeping.

    ``alpha`` is clamped into (0, 1]; anything that had to be clamped or
    could not be determined keeps its raw value in ``raw_alpha`` and a reason
    in ``flags``.
    """

    method: str
    alpha: dict[str, float]
    raw_alpha: dict[str, float]
    flags: dict[str, str] = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({
            "method": self.method,
            "alpha": dict(sorted(self.alpha.items())),
            "raw_alpha": dict(sorted(self.raw_alpha.items())),
            "flags": dict(sorted(self.flags.items())),
            "diagnostics": self.diagnostics,
        }, indent=2, default=str)


def _finish_report(method: str, raw: dict[str, float], flags: dict[str, str],
                   diagnostics: dict) -> EstimateReport:
    alpha = {}
    for e, v in raw.items():
        if math.isnan(v):
            flags.setdefault(e, "degenerate")
            alpha[e] = v
        elif not CLAMP_EPS <= v <= 1.0:
            flags.setdefault(e, "clamped")
            alpha[e] = min(max(v, CLAMP_EPS), 1.0)
        else:
            alpha[e] = v
    return EstimateReport(method, alpha, raw, flags, diagnostics)


# ---------------------------------------------------------------------------
# tree MLE
# ---------------------------------------------------------------------------

def _require_tree_mode(config: Configuration):
    if not config.is_tree_mode:
        raise EstimationError(
            "tree-mode MLE needs a directed tree whose leaves are the sources"
            " and receivers and whose interior nodes are pure coding or"
            " branching points")


def solve_tree_gammas(config: Configuration, gammas: GammaEstimates) -> EstimateReport:
    """Invert the gamma map on a general tree-mode configuration.

    Coding points solve their fixed point over in-edge statistics, branching
    points over out-edge statistics; the two unknowns at each interior node
    (chance a probe reaches it, chance it would deliver onward) then follow,
    and each link rate is its gamma divided by the endpoint terms.
    """
    _require_tree_mode(config)
    t = config.topology
    gam = gammas.edge_gamma
    up_hat: dict[str, float] = {s: 1.0 for s in config.sources}
    down_hat: dict[str, float] = {r: 1.0 for r in config.receivers}
    flags: dict[str, str] = {}
    iters: dict[str, int] = {}

    for v in t.nodes:
        if v in up_hat or v in down_hat:
            continue
        ins = [gam[e.id] for e in t.in_edges[v]]
        outs = [gam[e.id] for e in t.out_edges[v]]
        if len(t.in_edges[v]) >= 2:
            gamma_node = outs[0]
            b, flag, it = solve_node_fixed_point(gamma_node, ins)
            a = gamma_node / b if b and not math.isnan(b) else math.nan
        else:
            gamma_node = ins[0]
            a, flag, it = solve_node_fixed_point(gamma_node, outs)
            b = gamma_node / a if a and not math.isnan(a) else math.nan
        down_hat[v], up_hat[v] = b, a
        iters[v] = it
        if flag:
            flags[f"node:{v}"] = flag

    raw = {}
    for e in t.edges:
        denom = up_hat[e.tail] * down_hat[e.head]
        raw[e.id] = gam[e.id] / denom if denom and not math.isnan(denom) else math.nan
    diagnostics = {"node_iterations": iters, "up_hat": up_hat, "down_hat": down_hat}
    return _finish_report("tree-mle", raw, flags, diagnostics)


def mle_tree(config: Configuration, hist: OutcomeHistogram) -> EstimateReport:
    """All-links MLE on a tree-mode configuration.

    Hourglass trees go through the two classical reductions (multicast tree
    below the fan-out, reverse multicast tree above the merge, quotient for
    the middle link); everything else uses the per-node inversion, which
    coincides with the reductions wherever both apply.
    """
    _require_tree_mode(config)
    gammas = estimate_gammas(config, hist)
    if config.full_flow_edge is not None:
        return _mle_hourglass(config, hist, gammas)
    return solve_tree_gammas(config, gammas)


def _mle_hourglass(config: Configuration, hist: OutcomeHistogram,
                   gammas: GammaEstimates) -> EstimateReport:
    cd = config.full_flow_edge
    edge = config.topology.edge_by_id[cd]
    mc_config, mc_hist = reduce_multicast(config, hist)
    rm_config, rm_hist = reduce_reverse(config, hist)
    mc = minc_solve(mc_config, node_gammas_multicast(mc_config, mc_hist))
    rm = rminc_solve(rm_config, node_gammas_reverse(rm_config, rm_hist))

    raw: dict[str, float] = {}
    flags: dict[str, str] = {}
    for e in config.topology.edges:
        if e.id == cd:
            continue
        raw[e.id] = mc.raw_alpha[e.id] if e.id in mc.raw_alpha else rm.raw_alpha[e.id]
    raw[cd] = estimate_alpha_cd(gammas.gamma_cd,
                                rm.diagnostics["a_hat"][edge.tail],
                                mc.diagnostics["a_hat"][edge.head])
    for rep in (mc, rm):
        for k, v in rep.flags.items():
            if k in raw or k.startswith("node:"):
                flags.setdefault(k, v)
    diagnostics = {"multicast": mc.diagnostics, "reverse": rm.diagnostics}
    return _finish_report("tree-mle", raw, flags, diagnostics)


def estimate_alpha_cd(gamma_cd: float, a_r_tail: float, a_m_head: float) -> float:
    """MLE of the full-flow link from the two reduction solutions.

    ``a_r_tail`` is the estimated chance the merge node's aggregate delivery
    works in the reverse reduction, ``a_m_head`` its mirror in the multicast
    reduction; their product double-counts the middle link's own statistic,
    hence the quotient.
    """
    if gamma_cd <= 0.0:
        return math.nan
    return a_r_tail * a_m_head / gamma_cd


# ---------------------------------------------------------------------------
# multicast / reverse-multicast solvers
# ---------------------------------------------------------------------------

def node_gammas_multicast(config: Configuration, hist: OutcomeHistogram) -> dict[str, float]:
    """gamma per non-root node of a single-source tree (keyed by link head)."""
    return estimate_gammas(config, hist).gamma_m


def node_gammas_reverse(config: Configuration, hist: OutcomeHistogram) -> dict[str, float]:
    """gamma per non-sink node of a single-receiver tree (keyed by link tail)."""
    return estimate_gammas(config, hist).gamma_r


def minc_solve(config: Configuration, gamma: dict[str, float]) -> EstimateReport:
    """Recursive MLE for a single-source multicast tree.

    ``gamma[k]`` is the probability some receiver at or below node k saw the
    probe.  A_hat[k] estimates the chance the path from the root down to k
    works; leaves pin it to their gamma, interior nodes solve the fixed
    point over their children, and each link is the ratio of consecutive
    A_hat values.
    """
    if len(config.sources) != 1:
        raise EstimationError("multicast solver needs exactly one source")
    t = config.topology
    root = config.sources[0]
    a_hat: dict[str, float] = {root: 1.0}
    flags: dict[str, str] = {}
    iters: dict[str, int] = {}
    for v in reversed(t.topological_order()):
        if v == root:
            continue
        kids = t.out_edges[v]
        if not kids:
            a_hat[v] = gamma[v]
        else:
            child_g = [gamma[e.head] for e in kids]
            a, flag, it = solve_node_fixed_point(gamma[v], child_g)
            a_hat[v] = a
            iters[v] = it
            if flag:
                flags[f"node:{v}"] = flag
    raw = {}
    for e in t.edges:
        denom = a_hat[e.tail]
        raw[e.id] = a_hat[e.head] / denom if denom and not math.isnan(denom) else math.nan
    return _finish_report("minc", raw, flags,
                          {"a_hat": a_hat, "node_iterations": iters})


def rminc_solve(config: Configuration, gamma: dict[str, float]) -> EstimateReport:
    """Mirror of :func:`minc_solve` for a single-receiver reverse multicast
    tree: parents take the place of children and gamma is keyed by link tail."""
    if len(config.receivers) != 1:
        raise EstimationError("reverse-multicast solver needs exactly one receiver")
    t = config.topology
    sink = config.receivers[0]
    a_hat: dict[str, float] = {sink: 1.0}
    flags: dict[str, str] = {}
    iters: dict[str, int] = {}
    for v in t.topological_order():
        if v == sink:
            continue
        parents = t.in_edges[v]
        if not parents:
            a_hat[v] = gamma[v]
        else:
            parent_g = [gamma[e.tail] for e in parents]
            a, flag, it = solve_node_fixed_point(gamma[v], parent_g)
            a_hat[v] = a
            iters[v] = it
            if flag:
                flags[f"node:{v}"] = flag
    raw = {}
    for e in t.edges:
        denom = a_hat[e.head]
        raw[e.id] = a_hat[e.tail] / denom if denom and not math.isnan(denom) else math.nan
    return _finish_report("rminc", raw, flags,
                          {"a_hat": a_hat, "node_iterations": iters})


# ---------------------------------------------------------------------------
# hourglass reductions
# ---------------------------------------------------------------------------

AGG_MULTICAST = "agg_m"
AGG_REVERSE = "agg_r"


def _hourglass_split(config: Configuration) -> tuple[Edge, set[str], set[str]]:
    cd = config.full_flow_edge
    if cd is None:
        raise EstimationError("configuration has no full-flow link to reduce around")
    edge = config.topology.edge_by_id[cd]
    t = config.topology
    desc = {edge.head}
    stack = [edge.head]
    while stack:
        for out in t.out_edges[stack.pop()]:
            if out.head not in desc:
                desc.add(out.head)
                stack.append(out.head)
    below = {e.id for e in t.edges if e.id != cd and e.tail in desc}
    above = {e.id for e in t.edges if e.id != cd and e.id not in below}
    return edge, above, below


def reduce_multicast(config: Configuration, hist: OutcomeHistogram
                     ) -> tuple[Configuration, OutcomeHistogram]:
    """Collapse everything above the full-flow link into one aggregate link.

    The reduced graph is a single-source multicast tree rooted at the merge
    node; outcomes map by replacing each receiver's payload with a single
    did-it-arrive bit, and counts add up over the collapsed classes.
    """
    edge, _above, below = _hourglass_split(config)
    edges = [Edge(AGG_MULTICAST, edge.tail, edge.head)]
    edges += [e for e in config.topology.edges if e.id in below]
    mc_config = Configuration(Topology(tuple(edges)), sources=(edge.tail,),
                              receivers=config.receivers)
    mc_hist = OutcomeHistogram()
    for outcome, c in hist.counts.items():
        obs = _tree_observation(config, outcome)
        entries = tuple((r, 1 if obs[r] else 0) for r in sorted(config.receivers))
        mc_hist.add(Outcome("tree", entries), c)
    return mc_config, mc_hist


def reduce_reverse(config: Configuration, hist: OutcomeHistogram
                   ) -> tuple[Configuration, OutcomeHistogram]:
    """Collapse everything below the full-flow link into one aggregate link.

    The reduced graph is a single-receiver reverse multicast tree; a source's
    probe counts as delivered when any receiver saw it, so the reduced
    outcome is the OR of the per-receiver bitmasks.
    """
    edge, above, _below = _hourglass_split(config)
    edges = [Edge(AGG_REVERSE, edge.tail, edge.head)]
    edges += [e for e in config.topology.edges if e.id in above]
    rm_config = Configuration(Topology(tuple(edges)), sources=config.sources,
                              receivers=(edge.head,))
    rm_hist = OutcomeHistogram()
    for outcome, c in hist.counts.items():
        obs = _tree_observation(config, outcome)
        mask = 0
        for r in config.receivers:
            mask |= obs[r]
        rm_hist.add(Outcome("tree", ((edge.head, mask),)), c)
    return rm_config, rm_hist


def reduce_multicast_model(config: Configuration, model: LossModel) -> LossModel:
    """Loss model of the reduced multicast tree (aggregate link rate =
    middle-link rate times the chance at least one source path reaches it)."""
    edge, _above, below = _hourglass_split(config)
    up = _reach_probability_up(config, model)
    alpha = {eid: model.alpha[eid] for eid in below}
    alpha[AGG_MULTICAST] = model.alpha[edge.id] * up[edge.tail]
    return LossModel(alpha)


def reduce_reverse_model(config: Configuration, model: LossModel) -> LossModel:
    edge, above, _below = _hourglass_split(config)
    down = _deliver_probability_down(config, model)
    alpha = {eid: model.alpha[eid] for eid in above}
    alpha[AGG_REVERSE] = model.alpha[edge.id] * down[edge.head]
    return LossModel(alpha)


# ---------------------------------------------------------------------------
# Fisher information and confidence intervals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FisherResult:
    order: tuple[str, ...]
    information: np.ndarray
    inverse: np.ndarray
    condition_number: float


def fisher_matrix(config: Configuration, model: LossModel, method: str = "numeric",
                  step: float = 1e-5) -> FisherResult:
    """Fisher information of one experiment's outcome w.r.t. the link rates.

    ``numeric`` evaluates E[grad log p . grad log p^T] with central finite
    differences over the exact outcome distribution; ``closed-form-5link``
    evaluates the published inverse for the five-link hourglass directly.
    """
    order = tuple(sorted(model.alpha))
    if method == "closed-form-5link":
        inv = _fisher_inverse_tree5(config, model, order)
        info = np.linalg.inv(inv)
        return FisherResult(order, info, inv, float(np.linalg.cond(info)))
    if method != "numeric":
        raise EstimationError(f"unknown Fisher method {method!r}")

    for e, a in model.alpha.items():
        if not step < a < 1.0 - step:
            raise EstimationError(
                f"numeric Fisher needs alpha in ({step}, {1 - step}); edge {e!r} has {a}")
    center = exact_distribution(config, model)
    outcomes = sorted(center, key=Outcome.key)
    p0 = np.array([center[o] for o in outcomes])
    grads = np.zeros((len(order), len(outcomes)))
    for i, eid in enumerate(order):
        up = dict(model.alpha); up[eid] += step
        dn = dict(model.alpha); dn[eid] -= step
        dist_up = exact_distribution(config, LossModel(up))
        dist_dn = exact_distribution(config, LossModel(dn))
        pu = np.array([dist_up.get(o, 0.0) for o in outcomes])
        pd = np.array([dist_dn.get(o, 0.0) for o in outcomes])
        grads[i] = (np.log(pu) - np.log(pd)) / (2.0 * step)
    info = (grads * p0[None, :]) @ grads.T
    inv = np.linalg.inv(info)
    return FisherResult(order, info, inv, float(np.linalg.cond(info)))


def _fisher_inverse_tree5(config: Configuration, model: LossModel,
                          order: tuple[str, ...]) -> np.ndarray:
    """The five-link hourglass inverse Fisher matrix in closed form.

    Coordinates follow ``order`` which must be the five edges (two source
    links, the middle link, two receiver links).
    """
    cd = config.full_flow_edge
    if cd is None or len(config.topology.edges) != 5:
        raise EstimationError("closed form applies to the five-link hourglass only")
    edge = config.topology.edge_by_id[cd]
    t = config.topology
    src_edges = sorted(e.id for e in t.in_edges[edge.tail])
    rcv_edges = sorted(e.id for e in t.out_edges[edge.head])
    if len(src_edges) != 2 or len(rcv_edges) != 2:
        raise EstimationError("closed form applies to the five-link hourglass only")
    aA, aB = (model.alpha[e] for e in src_edges)
    aE, aF = (model.alpha[e] for e in rcv_edges)
    aC = model.alpha[cd]
    bA, bB, bE, bF = 1 - aA, 1 - aB, 1 - aE, 1 - aF
    uEF = aE + aF - aE * aF
    uAB = aA + aB - aA * aB

    i33_num = -aC * (
        -aB * bB * aE * aF
        - aA ** 2 * bB * aE * (-1 + aB * (2 + aC * (-aE * bF - aF))) * aF
        + aA * (
            -aE * aF
            + aB ** 2 * aE * aF * (-3 + aC * (aE + aF - aE * aF))
            + aB * (

                -aF * bF
                + aE * (-1 + 7 * aF - 3 * aF ** 2)
                + aE ** 2 * (1 - 3 * aF + 2 * aF ** 2)
            )
        )
    )
    i33 = i33_num / (aA * aB * aE * aF * (-aA * bB - aB) * (-aE * bF - aF))

    m = {
        (src_edges[0], src_edges[0]): aA * bA / (aB * aC * uEF),
        (src_edges[0], src_edges[1]): bA * bB / (aC * uEF),
        (src_edges[0], cd): -bA * bB / (aB * uEF),
        (src_edges[1], src_edges[1]): aB * bB / (aA * aC * uEF),
        (src_edges[1], cd): -bA * bB / (aA * uEF),
        (cd, cd): i33,
        (cd, rcv_edges[0]): -bE * bF / (aF * uAB),
        (cd, rcv_edges[1]): -bE * bF / (aE * uAB),
        (rcv_edges[0], rcv_edges[0]): aE * bE / (aC * aF * uAB),
        (rcv_edges[0], rcv_edges[1]): bE * bF / (aC * uAB),
        (rcv_edges[1], rcv_edges[1]): aF * bF / (aC * aE * uAB),
    }
    idx = {e: i for i, e in enumerate(order)}
    out = np.zeros((5, 5))
    for (e1, e2), v in m.items():
        out[idx[e1], idx[e2]] = v
        out[idx[e2], idx[e1]] = v
    return out


def normal_quantile(p: float) -> float:
    """Inverse standard-normal CDF (rational approximation, error << 1e-8)."""
    return NormalDist().inv_cdf(p)


def confidence_interval(fisher: FisherResult, n: int, delta: float) -> dict[str, float]:
    """Per-edge asymptotic half-widths: z_{delta/2} * sqrt(inv_kk / n)."""
    if n < 1:
        raise EstimationError("need at least one experiment")
    if not 0.0 < delta < 1.0:
        raise EstimationError("delta must be in (0, 1)")
    z = normal_quantile(1.0 - delta / 2.0)
    out = {}
    for i, eid in enumerate(fisher.order):
        var = fisher.inverse[i, i]
        if var < 0:
            raise EstimationError(f"negative variance for edge {eid!r}: {var}")
        out[eid] = z * math.sqrt(var / n)
    return out


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricsResult:
    mse: dict[str, float]
    ent: float
    ent_av: float


def metrics(model: LossModel, reports: list[EstimateReport]) -> MetricsResult:
    """Mean squared error per edge across trials, plus the log-MSE summary.

    ent sums the natural log of the per-edge MSEs (a shifted differential
    entropy of the error vector under a Gaussian approximation); an exactly
    zero MSE yields -inf.
    """
    if not reports:
        raise EstimationError("need at least one report")
    edges = sorted(model.alpha)
    mse = {}
    for e in edges:
        errs = [(rep.alpha[e] - model.alpha[e]) ** 2 for rep in reports]
        mse[e] = sum(errs) / len(errs)
    ent = sum(math.log(v) if v > 0 else -math.inf for v in mse.values())
    return MetricsResult(mse, ent, ent / len(edges))


def report_csv(model: LossModel, report: EstimateReport,
               mse: dict[str, float] | None = None,
               ci: dict[str, float] | None = None) -> str:
    lines = ["edge,alpha_true,alpha_hat,mse,ci_halfwidth"]
    for e in sorted(model.alpha):
        m = "" if mse is None or e not in mse else repr(mse[e])
        c = "" if ci is None or e not in ci else repr(ci[e])
        lines.append(f"{e},{model.alpha[e]!r},{report.alpha.get(e, math.nan)!r},{m},{c}")
    return "\n".join(lines) + "\n"

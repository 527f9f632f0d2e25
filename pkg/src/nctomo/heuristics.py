"""Suboptimal estimators: subtree decomposition, the MINC-like heuristic, and
sum-product belief propagation over the link/path factor graph.

The first two are tree-mode estimators that cope with unobservable coding
points by inferring their receptions from downstream receivers: a receiver
holding a combination that contains source i's probe proves the coding point
on that path received it.  When nothing at all shows up downstream the
reception is undecidable and is resolved "received" with probability ``p``
(a seeded coin per experiment and coding point).  Belief propagation works
from path up/down states instead and applies to general DAGs as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._rng import generator
from .fields import PathTable, decode_observation
from .mle import (EstimateReport, EstimationError, _finish_report,
                  _require_tree_mode, minc_solve, solve_node_fixed_point)
from .simulate import LossModel, OutcomeHistogram
from .topology import Configuration, PathSet, Topology

MAX_SIMULTANEOUS_COINS = 20


# ---------------------------------------------------------------------------
# subtree partition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Subtree:
    """One multicast component of the partition.

    ``root_bit`` is the probe index rooting the component, or None when the
    root is a coding point re-emitting whatever combination it received.
    """

    config: Configuration
    root: str
    root_bit: int | None
    real_receivers: tuple[str, ...]
    virtual_receivers: tuple[str, ...]


@dataclass(frozen=True)
class SubtreePartition:
    config: Configuration
    subtrees: tuple[Subtree, ...]

    @property
    def coding_points(self) -> tuple[str, ...]:
        return self.config.coding_points


def subtree_decompose(config: Configuration) -> SubtreePartition:
    """Split a tree at its coding points into multicast components.

    Each coding point acts as a virtual receiver for the components feeding
    it and as the virtual source of the component below it, so every
    component is a single-root multicast tree.
    """
    _require_tree_mode(config)
    t = config.topology
    coding = set(config.coding_points)

    comp: dict[str, int] = {}

    def merge(a: int, b: int) -> int:
        for eid, c in comp.items():
            if c == b:
                comp[eid] = a
        return a

    for i, e in enumerate(t.edges):
        comp[e.id] = i
    for n in t.nodes:
        if n in coding:
            continue
        touching = [e.id for e in t.in_edges[n] + t.out_edges[n]]
        for other in touching[1:]:
            if comp[other] != comp[touching[0]]:
                merge(comp[touching[0]], comp[other])

    subtrees = []
    for cid in sorted(set(comp.values())):
        edges = tuple(e for e in t.edges if comp[e.id] == cid)
        sub_topo = Topology(edges)
        inner_heads = {e.head for e in edges}
        roots = [n for n in sub_topo.nodes if n not in inner_heads]
        if len(roots) != 1:
            raise EstimationError(f"component without a unique root: {roots}")
        root = roots[0]
        leaves_below = [n for n in sub_topo.nodes
                        if n != root and not [e for e in edges if e.tail == n]]
        virtual = tuple(sorted(n for n in leaves_below if n in coding))
        real = tuple(sorted(n for n in leaves_below if n not in coding))
        sub_config = Configuration(sub_topo, sources=(root,),
                                   receivers=tuple(sorted(leaves_below)))
        root_bit = config.source_index.get(root)
        subtrees.append(Subtree(sub_config, root, root_bit, real, virtual))
    return SubtreePartition(config, tuple(subtrees))


# ---------------------------------------------------------------------------
# shared vectorized view of a histogram, with coin-resolved coding receptions
# ---------------------------------------------------------------------------

@dataclass
class _AugmentedClasses:
    """Outcome classes with both the receiver masks and the (coin-resolved)
    inferred reception mask per coding point.

    Classes whose downstream observations cannot settle a coding point's
    reception are split into weighted subclasses per coin pattern, drawn
    binomially for integer counts and by expectation for fractional ones.
    """

    receivers: tuple[str, ...]
    coding_points: tuple[str, ...]
    weights: np.ndarray      # (n_classes,)
    obs: np.ndarray          # (n_classes, n_receivers) bitmasks
    xhat: np.ndarray         # (n_classes, n_coding) inferred reception bitmasks
    received: np.ndarray     # (n_classes, n_coding) bool: coding point got a packet


def infer_coding_receptions(config: Configuration, obs: dict[str, int]) -> dict[str, int]:
    """Deterministic part of the reception inference: source i's probe reached
    coding point c iff some receiver behind c holds a combination containing
    probe i."""
    out = {}
    for c in config.coding_points:
        anc_mask = sum(1 << b for b in config.source_bits_reaching[c])
        seen = 0
        for r in config.receivers_reachable[c]:
            seen |= obs[r]
        out[c] = seen & anc_mask
    return out


ReceptionPriors = dict[tuple[str, int], float]  # (coding point, source bit) -> prob


def calibrate_reception_priors(config: Configuration, model: LossModel) -> ReceptionPriors:
    """Per-bit reception probabilities conditioned on a silent downstream.

    For coding point c and source bit b this is P[b reached c | no receiver
    behind c observed anything] under ``model``; in a tree the per-bit
    arrivals are independent path products and downstream delivery is
    payload-independent, so the conditional has a closed form.
    """
    from .mle import _deliver_probability_down

    deliver = _deliver_probability_down(config, model)
    # per-bit path products down to every node
    reach: dict[str, dict[int, float]] = {}
    for n in config.topology.topological_order():
        probs: dict[int, float] = {}
        if n in config.source_index:
            probs[config.source_index[n]] = 1.0
        for e in config.topology.in_edges[n]:
            for b, q in reach[e.tail].items():
                probs[b] = model.alpha[e.id] * q
        reach[n] = probs
    out: ReceptionPriors = {}
    for c in config.coding_points:
        miss = 1.0
        for b in sorted(config.source_bits_reaching[c]):
            miss *= 1.0 - reach[c][b]
        arrived = 1.0 - miss
        empty = miss + arrived * (1.0 - deliver[c])
        for b in sorted(config.source_bits_reaching[c]):
            out[(c, b)] = reach[c][b] * (1.0 - deliver[c]) / empty if empty > 0 else 0.0
    return out


def _augment_histogram(config: Configuration, hist: OutcomeHistogram,
                       p: float | ReceptionPriors, seed: int) -> _AugmentedClasses:
    receivers = tuple(sorted(config.receivers))
    coding = tuple(sorted(config.coding_points))
    classes = sorted(hist.counts.items(), key=lambda kv: kv[0].key())
    if not classes:
        raise EstimationError("empty histogram")

    rcv_pos = {r: i for i, r in enumerate(receivers)}
    anc_bits = [sorted(config.source_bits_reaching[c]) for c in coding]
    anc_masks = np.array([sum(1 << b for b in bits) for bits in anc_bits],
                         dtype=np.int64)
    desc_cols = [np.array([rcv_pos[r] for r in sorted(config.receivers_reachable[c])],
                          dtype=np.intp) for c in coding]

    rows, weights, xh_rows, rec_rows = [], [], [], []
    for class_idx, (outcome, count) in enumerate(classes):
        obs = dict(outcome.entries)
        row = np.array([obs[r] for r in receivers], dtype=np.int64)
        seen_below = np.array([np.bitwise_or.reduce(row[cols]) if len(cols) else 0
                               for cols in desc_cols], dtype=np.int64)
        det = seen_below & anc_masks
        undecided = np.flatnonzero(seen_below == 0)
        if len(undecided) == 0:
            rows.append(row)
            weights.append(count)
            xh_rows.append(det)
            rec_rows.append(det != 0)
            continue
        # one coin per (coding point, bit) under per-bit priors, or a single
        # whole-packet coin per coding point for a scalar p
        coins: list[tuple[int, np.int64, float]] = []
        for c_idx in undecided:
            c = coding[c_idx]
            if isinstance(p, dict):
                coins.extend((c_idx, np.int64(1 << b), p[(c, b)]) for b in anc_bits[c_idx])
            else:
                coins.append((c_idx, anc_masks[c_idx], p))
        m = len(coins)
        if m > MAX_SIMULTANEOUS_COINS:
            raise EstimationError("too many simultaneously undecidable coding points")
        patterns = np.arange(1 << m)
        heads = (patterns[:, None] >> np.arange(m)[None, :]) & 1
        coin_p = np.array([pr for _c, _m, pr in coins])
        probs = np.prod(np.where(heads == 1, coin_p[None, :], 1.0 - coin_p[None, :]),
                        axis=1)
        if count == int(count):
            rng = generator(seed, 0x5EED, class_idx)
            alloc = rng.multinomial(int(count), probs)
        else:
            alloc = count * probs
        for pat in range(1 << m):
            w = float(alloc[pat])
            if w == 0.0:
                continue
            xh = det.copy()
            for j, (c_idx, mask, _pr) in enumerate(coins):
                if heads[pat, j]:
                    xh[c_idx] |= mask
            rows.append(row)
            weights.append(w)
            xh_rows.append(xh)
            rec_rows.append(xh != 0)
    return _AugmentedClasses(
        receivers, coding,
        np.array(weights, dtype=float),
        np.stack(rows) if rows else np.zeros((0, len(receivers)), dtype=np.int64),
        np.stack(xh_rows) if xh_rows else np.zeros((0, len(coding)), dtype=np.int64),
        np.stack(rec_rows) if rec_rows else np.zeros((0, len(coding)), dtype=bool),
    )


def _resolve_reception_priors(config: Configuration, hist: OutcomeHistogram,
                              p: float | str, seed: int, runner) -> float | ReceptionPriors:
    """Turn the ``p`` knob into concrete coin probabilities.

    Floats pass through (one whole-packet coin at that rate).  ``"auto"``
    bootstraps: estimate once with a neutral coin, derive the model-implied
    conditional reception probabilities, and refine; two rounds are enough
    for the priors to settle at this accuracy.
    """
    if not isinstance(p, str):
        return p
    if p != "auto":
        raise EstimationError(f"unknown reception-prior mode {p!r}")
    priors: float | ReceptionPriors = 0.5
    for _ in range(2):
        report = runner(priors)
        alpha = {e: min(max(v if not math.isnan(v) else 0.5, 0.01), 1.0)
                 for e, v in report.alpha.items()}
        priors = calibrate_reception_priors(config, LossModel(alpha))
    return priors


# ---------------------------------------------------------------------------
# MINC-like heuristic
# ---------------------------------------------------------------------------

def minc_like_estimate(config: Configuration, hist: OutcomeHistogram,
                       p: float | str = 0.5, seed: int = 0) -> EstimateReport:
    """Whole-tree inversion treating coding points as pseudo-receivers.

    Every coding point contributes an observation port holding its inferred
    reception (real downstream content where available, the undecidable-case
    coin where not), and link statistics count a probe as observed when it
    shows up at a real receiver or at such a port behind the link.  The
    statistics then run through the same per-node fixed points as the exact
    tree MLE.  On a single-source tree there are no coding points, nothing
    is inferred, and the result equals the multicast MLE exactly; around
    coding points the inferred ports make the middle links noticeably
    noisier.

    ``p`` is the probability that a silent downstream hides a successful
    reception: a float flips one whole-packet coin at that rate, while
    ``"auto"`` (default) calibrates per-bit coin rates to the estimated loss
    model itself.
    """
    _require_tree_mode(config)
    p = _resolve_reception_priors(
        config, hist, p, seed,
        lambda priors: _minc_like_run(config, hist, priors, seed))
    return _minc_like_run(config, hist, p, seed)


def _minc_like_run(config: Configuration, hist: OutcomeHistogram,
                   p: float | ReceptionPriors, seed: int) -> EstimateReport:
    aug = _augment_histogram(config, hist, p, seed)
    n = aug.weights.sum()
    t = config.topology
    rcv_pos = {r: i for i, r in enumerate(aug.receivers)}
    cp_pos = {c: i for i, c in enumerate(aug.coding_points)}

    def rate(event: np.ndarray) -> float:
        return float(aug.weights[event].sum() / n)

    # Two statistic families.  Delivery statistics (a probe provably reached
    # a real receiver) feed every ordinary node equation, exactly as in the
    # tree MLE.  Reception statistics (the inferred port content of a coding
    # point) feed only that coding point's own equation and the rate of its
    # in-links.  The separation matters: a port can claim receptions that
    # never happened (the coin), and such false positives must not leak into
    # equations that treat observations as proof of delivery.
    gamma: dict[str, float] = {}
    port_gamma: dict[str, float] = {}
    for e in t.edges:
        bits, rcvs = config.edge_crossing(e.id)
        bitmask = np.int64(sum(1 << b for b in bits))
        event = np.zeros(len(aug.weights), dtype=bool)
        for r in rcvs:
            event |= (aug.obs[:, rcv_pos[r]] & bitmask) != 0
        gamma[e.id] = rate(event)
        if e.head in cp_pos:
            port_gamma[e.id] = rate((aug.xhat[:, cp_pos[e.head]] & bitmask) != 0)

    up_hat: dict[str, float] = {s: 1.0 for s in config.sources}
    down_hat: dict[str, float] = {r: 1.0 for r in config.receivers}
    flags: dict[str, str] = {}
    for v in t.nodes:
        if v in up_hat or v in down_hat:
            continue
        if len(t.in_edges[v]) >= 2:
            # reception of anything at the port plays the node statistic
            gamma_node = rate(aug.xhat[:, cp_pos[v]] != 0)
            members = [port_gamma[e.id] for e in t.in_edges[v]]
        else:
            gamma_node = gamma[t.in_edges[v][0].id]
            members = [gamma[e.id] for e in t.out_edges[v]]
        x, flag, _ = solve_node_fixed_point(gamma_node, members)
        if len(t.in_edges[v]) >= 2:
            down_hat[v] = x
            up_hat[v] = gamma_node / x if x and not math.isnan(x) else math.nan
        else:
            up_hat[v] = x
            down_hat[v] = gamma_node / x if x and not math.isnan(x) else math.nan
        if flag:
            flags[f"node:{v}"] = flag

    raw = {}
    for e in t.edges:
        num = port_gamma.get(e.id, gamma[e.id])
        denom = up_hat[e.tail] * down_hat[e.head]
        raw[e.id] = num / denom if denom and not math.isnan(denom) else math.nan
    p_diag = p if not isinstance(p, dict) else {f"{c}/{b}": round(v, 6)
                                                for (c, b), v in sorted(p.items())}
    return _finish_report("minc-like", raw, flags, {"reception_priors": p_diag})


# ---------------------------------------------------------------------------
# subtree-decomposition estimator
# ---------------------------------------------------------------------------

def subtree_estimate(config: Configuration, hist: OutcomeHistogram,
                     p: float | str = 0.5, seed: int = 0,
                     partition: SubtreePartition | None = None) -> EstimateReport:
    """Independent multicast MLE per component of the coding-point partition.

    Components rooted at a coding point only count experiments in which the
    root demonstrably emitted something (or the undecidable-case coin says
    the silence was genuine loss); components rooted at a source treat
    coding points below them as additional receivers via the inferred
    receptions.  ``p`` works as in :func:`minc_like_estimate`.
    """
    partition = partition or subtree_decompose(config)
    p = _resolve_reception_priors(
        config, hist, p, seed,
        lambda priors: _subtree_run(config, hist, priors, seed, partition))
    return _subtree_run(config, hist, p, seed, partition)


def _subtree_run(config: Configuration, hist: OutcomeHistogram,
                 p: float | ReceptionPriors, seed: int,
                 partition: SubtreePartition) -> EstimateReport:
    aug = _augment_histogram(config, hist, p, seed)
    rcv_pos = {r: i for i, r in enumerate(aug.receivers)}
    cp_pos = {c: i for i, c in enumerate(aug.coding_points)}

    raw: dict[str, float] = {}
    flags: dict[str, str] = {}
    p_diag = p if not isinstance(p, dict) else {f"{c}/{b}": round(v, 6)
                                            for (c, b), v in sorted(p.items())}
    diagnostics: dict = {"reception_priors": p_diag, "valid_counts": {}}
    for sub in partition.subtrees:
        t = sub.config.topology
        if sub.root_bit is None:
            valid = aug.received[:, cp_pos[sub.root]]
        else:
            valid = np.ones(len(aug.weights), dtype=bool)
        n_valid = float(aug.weights[valid].sum())
        diagnostics["valid_counts"][sub.root] = n_valid
        if n_valid <= 0.0:
            for e in t.edges:
                raw[e.id] = math.nan
                flags[e.id] = "degenerate"
            continue

        # bits that can enter this component at all (via its root)
        root_mask = np.int64(sum(1 << b for b in config.source_bits_reaching[sub.root]))

        def leaf_event(leaf: str) -> np.ndarray:
            if leaf in cp_pos:
                # reception at a deeper coding point counts only for bits that
                # travelled through this component, not its other feeds
                x = aug.xhat[:, cp_pos[leaf]]
                if sub.root_bit is None:
                    return (x & root_mask) != 0
                return (x >> sub.root_bit & 1) != 0
            o = aug.obs[:, rcv_pos[leaf]]
            return (o != 0) if sub.root_bit is None else (o >> sub.root_bit & 1) != 0

        events = {leaf: leaf_event(leaf) for leaf in sub.config.receivers}
        below = sub.config.receivers_reachable
        gamma: dict[str, float] = {}
        for node in t.nodes:
            if node == sub.root:
                continue
            ev = np.zeros(len(aug.weights), dtype=bool)
            for leaf in below[node]:
                ev |= events[leaf]
            gamma[node] = float(aug.weights[valid & ev].sum() / n_valid)
        rep = minc_solve(sub.config, gamma)
        raw.update(rep.raw_alpha)
        for k, v in rep.flags.items():
            flags.setdefault(k, v)
    return _finish_report("subtree", raw, flags, diagnostics)


# ---------------------------------------------------------------------------
# factor graph and belief propagation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FactorGraph:
    """Bipartite link/path graph: one variable per edge, one factor per
    observable source-to-receiver path, joined by path membership."""

    edge_ids: tuple[str, ...]
    paths: tuple[tuple[str, ...], ...]
    members: tuple[tuple[int, ...], ...]  # per factor: variable indices

    @cached_property
    def edge_index(self) -> dict[str, int]:
        return {e: i for i, e in enumerate(self.edge_ids)}


def build_factor_graph(config: Configuration, paths: PathSet) -> FactorGraph:
    edge_ids = tuple(sorted(e.id for e in config.topology.edges))
    idx = {e: i for i, e in enumerate(edge_ids)}
    members = tuple(tuple(idx[e] for e in p) for p in paths.all_paths)
    return FactorGraph(edge_ids, paths.all_paths, members)


def path_states_from_histogram(config: Configuration, paths: PathSet,
                               hist: OutcomeHistogram) -> tuple[np.ndarray, np.ndarray]:
    """Tree-mode path states: path (source s -> receiver r) worked in an
    experiment iff r's payload contains s's probe."""
    classes = sorted(hist.counts.items(), key=lambda kv: kv[0].key())
    keys = []
    for (s, r, _e), plist in sorted(paths.triplets.items()):
        keys.extend((s, r) for _ in plist)
    receivers = sorted(config.receivers)
    rcv_pos = {r: i for i, r in enumerate(receivers)}
    obs = np.zeros((len(classes), len(receivers)), dtype=np.int64)
    weights = np.zeros(len(classes))
    for i, (outcome, c) in enumerate(classes):
        weights[i] = c
        for r, mask in outcome.entries:
            obs[i, rcv_pos[r]] = mask
    states = np.zeros((len(classes), len(keys)), dtype=bool)
    for j, (s, r) in enumerate(keys):
        states[:, j] = (obs[:, rcv_pos[r]] >> config.source_index[s] & 1) != 0
    return states, weights


def path_states_from_decode(table: PathTable, paths: PathSet,
                            hist: OutcomeHistogram,
                            heuristic: str = "first") -> tuple[np.ndarray, np.ndarray]:
    """Coded-mode path states recovered by the decode tables."""
    classes = sorted(hist.counts.items(), key=lambda kv: kv[0].key())
    n_paths = len(paths.all_paths)
    offsets = {}
    pos = 0
    for key in sorted(paths.triplets):
        offsets[key] = pos
        pos += len(paths.triplets[key])
    states = np.zeros((len(classes), n_paths), dtype=bool)
    weights = np.zeros(len(classes))
    for i, (outcome, c) in enumerate(classes):
        weights[i] = c
        received = {(r, e): vec for r, e, vec in outcome.entries}
        decoded = decode_observation(table, received, heuristic=heuristic)
        for key, mask in decoded.items():
            base = offsets[key]
            for j in range(len(paths.triplets[key])):
                states[i, base + j] = bool(mask >> j & 1)
    return states, weights


_LLR_CAP = 30.0


def bp_estimate(graph: FactorGraph, states: np.ndarray, weights: np.ndarray,
                damping: float = 0.9, max_iter: int = 100,
                tol: float = 1e-6) -> EstimateReport:
    """Sum-product estimation of per-link success rates from path states.

    Each experiment turns every observable path into a factor: "all member
    links up" when its probe arrived, "at least one member down" when it did
    not.  Message passing runs per outcome class (vectorized across classes)
    with variable-to-factor log-odds scaled by ``damping``; the per-class
    posteriors are averaged into rate estimates, which feed back as priors
    until the estimate is stable.  Hitting the iteration budget flags the
    report and returns the last iterate.
    """
    if not 0.0 < damping <= 1.0:
        raise EstimationError("damping must be in (0, 1]")
    n_classes, n_paths = states.shape
    if n_paths != len(graph.members):
        raise EstimationError("path-state matrix does not match the factor graph")
    n_edges = len(graph.edge_ids)
    if weights.sum() <= 0:
        raise EstimationError("empty path-state data")

    # identical path-state rows produce identical messages; fold them
    worked, inverse = np.unique(states, axis=0, return_inverse=True)
    w = np.zeros(len(worked))
    np.add.at(w, inverse, weights)
    n_classes = len(worked)
    n = w.sum()

    slot_var = np.concatenate([np.array(m, dtype=np.intp) for m in graph.members]) \
        if graph.members else np.zeros(0, dtype=np.intp)
    slot_factor = np.concatenate([np.full(len(m), f, dtype=np.intp)
                                  for f, m in enumerate(graph.members)]) \
        if graph.members else np.zeros(0, dtype=np.intp)
    bounds = np.concatenate([[0], np.cumsum([len(m) for m in graph.members])])[:-1]
    n_slots = len(slot_var)
    in_any_path = np.zeros(n_edges, dtype=bool)
    in_any_path[slot_var] = True

    # gather slots by variable so per-edge message totals are a reduceat
    var_order = np.argsort(slot_var, kind="stable")
    var_sorted = slot_var[var_order]
    var_starts = np.searchsorted(var_sorted, np.arange(n_edges))
    if n_slots:
        var_starts = np.minimum(var_starts, n_slots - 1)

    def totals_per_edge(msg: np.ndarray) -> np.ndarray:
        total = np.zeros((len(msg), n_edges))
        if n_slots:
            sums = np.add.reduceat(msg[:, var_order], var_starts, axis=1)
            # searchsorted gives one segment per edge id, empty edges get the
            # following segment's sum; mask them out
            present = np.zeros(n_edges, dtype=bool)
            present[slot_var] = True
            total[:, present] = sums[:, present]
        return total

    worked_slots = worked[:, slot_factor]
    alpha = np.full(n_edges, 0.5)
    # messages persist across prior updates: after the first pass the inner
    # sweeps only have to track the (small) prior shift
    msg = np.zeros((n_classes, n_slots))  # factor -> variable, log-odds
    flag_nonconv = False

    for _outer in range(max_iter):
        prior = np.clip(alpha, 1e-9, 1 - 1e-9)
        prior_llr = np.log(prior) - np.log1p(-prior)
        converged = False
        for _inner in range(max_iter):
            total = totals_per_edge(msg)
            q_llr = damping * (prior_llr[None, slot_var] + total[:, slot_var] - msg)
            q_llr = np.clip(q_llr, -_LLR_CAP, _LLR_CAP)
            log_q_up = -np.logaddexp(0.0, -q_llr)  # log sigmoid
            fact_sum = np.add.reduceat(log_q_up, bounds, axis=1)
            others = fact_sum[:, slot_factor] - log_q_up
            m_up = -np.expm1(np.minimum(others, -1e-300))
            new_msg = np.where(worked_slots, _LLR_CAP,
                               np.maximum(np.log(np.maximum(m_up, 1e-300)), -_LLR_CAP))
            # blend half old, half new to settle oscillations on cyclic graphs
            new_msg = 0.5 * (msg + new_msg)
            delta = np.max(np.abs(new_msg - msg)) if n_slots else 0.0
            msg = new_msg
            if delta < 10.0 * tol:
                converged = True
                break
        if not converged and n_slots:
            flag_nonconv = True
        belief_llr = np.clip(prior_llr[None, :] + totals_per_edge(msg), -_LLR_CAP, _LLR_CAP)
        belief = 1.0 / (1.0 + np.exp(-belief_llr))
        new_alpha = np.where(in_any_path, w @ belief / n, alpha)
        if np.max(np.abs(new_alpha - alpha)) < tol:
            alpha = new_alpha
            break
        alpha = new_alpha
    else:
        flag_nonconv = True

    raw = {e: float(alpha[i]) for i, e in enumerate(graph.edge_ids)}
    flags = {e: "unobserved" for i, e in enumerate(graph.edge_ids) if not in_any_path[i]}
    if flag_nonconv:
        flags["bp"] = "non-convergence"
    return _finish_report("bp", raw, flags, {"damping": damping})

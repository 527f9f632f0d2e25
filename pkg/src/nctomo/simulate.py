"""Monte-Carlo probe experiments and the exact brute-force outcome oracle.

Each experiment draws an independent Bernoulli up/down state per link, pushes
one probe per source through the graph (XOR combining in tree mode, linear
combining over GF(2^k) in coded mode), and records what each receiver sees.
All randomness is counter-based, so experiment ``t`` of seed ``s`` is the
same no matter how runs are sharded.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from ._rng import uniform_grid
from .fields import CodeAssignment
from .topology import Configuration, TopologyError

MAX_EXACT_EDGES = 25


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class LossModel:
    """Per-edge success probabilities, each in (0, 1]."""

    alpha: dict[str, float]

    def __post_init__(self):
        for e, a in self.alpha.items():
            if not 0.0 < a <= 1.0:
                raise SimulationError(f"alpha for edge {e!r} must be in (0, 1], got {a}")

    @classmethod
    def uniform(cls, config: Configuration, alpha: float) -> "LossModel":
        return cls({e.id: alpha for e in config.topology.edges})

    def require_edges(self, config: Configuration):
        missing = [e.id for e in config.topology.edges if e.id not in self.alpha]
        if missing:
            raise SimulationError(f"loss model missing edges: {missing}")


def parse_loss_model(text: str) -> LossModel:
    alpha = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise SimulationError(f"line {lineno}: expected '<edge_id> <alpha>', got {raw!r}")
        alpha[parts[0]] = float(parts[1])
    return LossModel(alpha)


def format_loss_model(model: LossModel) -> str:
    return "".join(f"{e} {a!r}\n" for e, a in sorted(model.alpha.items()))


# ---------------------------------------------------------------------------
# outcomes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Outcome:
    """One experiment's receiver observations in canonical form.

    Tree mode: ``entries`` maps each receiver (sorted) to the bitmask of
    source probes it saw.  Coded mode: one entry per (receiver, in-edge),
    holding the received payload vector (one field element per source).
    """

    mode: str  # "tree" | "coded"
    entries: tuple

    def key(self) -> str:
        if self.mode == "tree":
            return ";".join(f"{r}:{mask:x}" for r, mask in self.entries)
        return ";".join(f"{r}/{e}:" + ",".join(f"{v:x}" for v in vec)
                        for r, e, vec in self.entries)

    @classmethod
    def from_key(cls, mode: str, key: str) -> "Outcome":
        if mode == "tree":
            entries = []
            for part in key.split(";"):
                r, mask = part.rsplit(":", 1)
                entries.append((r, int(mask, 16)))
            return cls("tree", tuple(entries))
        entries = []
        for part in key.split(";"):
            loc, vec = part.rsplit(":", 1)
            r, e = loc.split("/", 1)
            entries.append((r, e, tuple(int(v, 16) for v in vec.split(","))))
        return cls("coded", tuple(entries))


class OutcomeHistogram:
    """Outcome counts over a batch of experiments.

    Counts may be fractional: feeding exact outcome probabilities (n = 1)
    through an estimator checks its infinite-sample behaviour without
    Monte-Carlo noise.
    """

    def __init__(self, counts: Mapping[Outcome, float] | None = None):
        self.counts: dict[Outcome, float] = dict(counts or {})

    @property
    def n(self) -> float:
        return sum(self.counts.values())

    def add(self, outcome: Outcome, weight: float = 1.0):
        self.counts[outcome] = self.counts.get(outcome, 0.0) + weight

    def merge(self, other: "OutcomeHistogram") -> "OutcomeHistogram":
        out = OutcomeHistogram(self.counts)
        for o, c in other.counts.items():
            out.add(o, c)
        return out

    def __eq__(self, other):
        return isinstance(other, OutcomeHistogram) and self.counts == other.counts

    def to_csv(self) -> str:
        lines = ["outcome,count"]
        for o in sorted(self.counts, key=Outcome.key):
            c = self.counts[o]
            c_txt = repr(c) if c != int(c) else str(int(c))
            lines.append(f"{o.key()},{c_txt}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, mode: str) -> "OutcomeHistogram":
        hist = cls()
        lines = [l for l in text.splitlines() if l and not l.startswith("#")]
        for line in lines[1:]:
            key, count = line.rsplit(",", 1)
            hist.add(Outcome.from_key(mode, key), float(count))
        return hist


# ---------------------------------------------------------------------------
# link-state sampling
# ---------------------------------------------------------------------------

def _edge_order(config: Configuration) -> list[str]:
    return sorted(e.id for e in config.topology.edges)


def sample_link_states(model: LossModel, config: Configuration, seed: int,
                       experiment: int) -> dict[str, bool]:
    """Bernoulli up/down draw for every edge of one experiment.

    The draw for (seed, experiment, edge) is fixed, so experiments can be
    generated in any order or in parallel shards.
    """
    order = _edge_order(config)
    u = uniform_grid(seed, np.array([experiment]), len(order))[0]
    return {eid: bool(u[i] < model.alpha[eid]) for i, eid in enumerate(order)}


def _sample_states_block(model: LossModel, config: Configuration, seed: int,
                         experiments: np.ndarray) -> tuple[list[str], np.ndarray]:
    order = _edge_order(config)
    u = uniform_grid(seed, experiments, len(order))
    alphas = np.array([model.alpha[eid] for eid in order])
    return order, u < alphas[None, :]


# ---------------------------------------------------------------------------
# probe propagation
# ---------------------------------------------------------------------------

def propagate(config: Configuration, link_states: Mapping[str, bool],
              code: CodeAssignment | None = None) -> Outcome:
    """Push one round of probes through the graph under fixed link states.

    Sources emit their unit payloads; every node forwards the combination of
    whatever arrived (XOR of bitmasks in tree mode, GF-linear combination in
    coded mode) on each up out-edge; a node that receives nothing emits
    nothing.  Nodes are processed in topological order, which requires an
    acyclic configuration.
    """
    t = config.topology
    order = t.topological_order()
    if code is None:
        payload: dict[str, int | None] = {n: None for n in t.nodes}
        for i, s in enumerate(config.sources):
            payload[s] = (payload[s] or 0) | (1 << i)
        for n in order:
            p = payload[n]
            if p is None:
                continue
            for e in t.out_edges[n]:
                if link_states[e.id]:
                    payload[e.head] = (payload[e.head] or 0) ^ p
        entries = tuple((r, payload[r] or 0) for r in sorted(config.receivers))
        return Outcome("tree", entries)

    f = code.field_spec
    m = len(config.sources)
    vec: dict[str, list[int] | None] = {n: None for n in t.nodes}
    for s in config.sources:
        v = vec[s] or [0] * m
        v[code.source_symbols[s]] ^= 1
        vec[s] = v
    received: dict[tuple[str, str], tuple[int, ...]] = {}
    for n in order:
        v = vec[n]
        if v is None:
            continue
        for e in t.out_edges[n]:
            if not link_states[e.id]:
                continue
            scaled = tuple(f.mul(code.coefficients[e.id], x) for x in v)
            if e.head in config.receivers:
                prev = received.get((e.head, e.id), (0,) * m)
                received[(e.head, e.id)] = tuple(a ^ b for a, b in zip(prev, scaled))
            cur = vec[e.head] or [0] * m
            vec[e.head] = [a ^ b for a, b in zip(cur, scaled)]
    entries = tuple((r, e.id, received.get((r, e.id), None) or (0,) * m)
                    for r in sorted(config.receivers)
                    for e in sorted(t.in_edges[r], key=lambda e: e.id))
    return Outcome("coded", entries)


# ---------------------------------------------------------------------------
# fast path-based evaluation (provably equal to propagate; see tests)
# ---------------------------------------------------------------------------

def _path_arrays(config: Configuration, code: CodeAssignment | None):
    """Per-path bookkeeping for vectorized outcome computation."""
    from .fields import path_monomial
    from .topology import enumerate_paths

    paths = enumerate_paths(config)
    order = _edge_order(config)
    pos = {eid: i for i, eid in enumerate(order)}
    rows = []  # (receiver, in_edge, source_index, monomial, edge positions)
    for (s, r, e_r), plist in sorted(paths.triplets.items()):
        for p in plist:
            mono = 1 if code is None else path_monomial(code, p)
            coord = config.source_index[s] if code is None else code.source_symbols[s]
            rows.append((r, e_r, coord, mono, np.array([pos[eid] for eid in p])))
    return order, rows


def _outcomes_from_states(config: Configuration, code: CodeAssignment | None,
                          states: np.ndarray, order: list[str], rows) -> list[Outcome]:
    n = states.shape[0]
    m = len(config.sources)
    if code is None:
        masks: dict[str, np.ndarray] = {r: np.zeros(n, dtype=np.int64)
                                        for r in config.receivers}
        for r, _e_r, coord, _mono, idx in rows:
            up = states[:, idx].all(axis=1)
            masks[r] |= up.astype(np.int64) << coord
        recs = sorted(config.receivers)
        stacked = np.stack([masks[r] for r in recs], axis=1)
        return [Outcome("tree", tuple(zip(recs, row.tolist()))) for row in stacked]

    slots = sorted({(r, e_r) for r, e_r, *_ in rows})
    slot_pos = {k: i for i, k in enumerate(slots)}
    val = np.zeros((n, len(slots), m), dtype=np.uint64)
    for r, e_r, coord, mono, idx in rows:
        up = states[:, idx].all(axis=1)
        val[:, slot_pos[(r, e_r)], coord] ^= np.where(up, np.uint64(mono), np.uint64(0))
    out = []
    for t in range(n):
        entries = tuple((r, e_r, tuple(int(x) for x in val[t, slot_pos[(r, e_r)]]))
                        for (r, e_r) in slots)
        out.append(Outcome("coded", entries))
    return out


def run_experiments(config: Configuration, model: LossModel, n: int, seed: int,
                    code: CodeAssignment | None = None,
                    start: int = 0) -> OutcomeHistogram:
    """Aggregate ``n`` independent experiments into an outcome histogram.

    Equivalent to ``n`` rounds of sample_link_states + propagate (the batch
    path evaluates whole paths at once, which coincides because payload
    combining is linear).  ``start`` offsets the experiment counter so shards
    ``[0, k)`` and ``[k, n)`` merge into exactly the run ``[0, n)``.
    """
    if n < 1:
        raise SimulationError("need at least one experiment")
    model.require_edges(config)
    order, rows = _path_arrays(config, code)
    hist = OutcomeHistogram()
    block = 65536
    for lo in range(start, start + n, block):
        exps = np.arange(lo, min(lo + block, start + n))
        order2, states = _sample_states_block(model, config, seed, exps)
        for o in _outcomes_from_states(config, code, states, order2, rows):
            hist.add(o)
    return hist


def exact_distribution(config: Configuration, model: LossModel,
                       code: CodeAssignment | None = None) -> dict[Outcome, float]:
    """Exact outcome distribution by enumerating all 2^|E| link states.

    The brute-force oracle behind most acceptance tests; refuses graphs with
    more than 25 edges.
    """
    model.require_edges(config)
    order = _edge_order(config)
    ne = len(order)
    if ne > MAX_EXACT_EDGES:
        raise SimulationError(f"{ne} edges exceeds the exact-enumeration cap"
                              f" of {MAX_EXACT_EDGES}")
    combos = np.arange(1 << ne, dtype=np.uint64)
    states = (combos[:, None] >> np.arange(ne, dtype=np.uint64)[None, :]) & np.uint64(1)
    states = states.astype(bool)
    alphas = np.array([model.alpha[eid] for eid in order])
    probs = np.prod(np.where(states, alphas[None, :], 1.0 - alphas[None, :]), axis=1)
    _, rows = _path_arrays(config, code)
    dist: dict[Outcome, float] = {}
    for outcome, p in zip(_outcomes_from_states(config, code, states, order, rows), probs):
        if p > 0.0:
            dist[outcome] = dist.get(outcome, 0.0) + float(p)
    return dist


def histogram_from_distribution(dist: Mapping[Outcome, float]) -> OutcomeHistogram:
    return OutcomeHistogram(dict(dist))


# ---------------------------------------------------------------------------
# dual-configuration outcome mapping
# ---------------------------------------------------------------------------

def outcome_dual(config: Configuration, outcome: Outcome) -> Outcome:
    """Map a tree-mode outcome to the corresponding outcome of the dual
    configuration.

    An outcome records which (source, receiver) pairs stayed connected; the
    same link states connect exactly the transposed pairs in the dual, which
    is the probability-preserving bijection between the two outcome spaces.
    """
    if outcome.mode != "tree":
        raise SimulationError("dual outcome mapping is defined for tree mode")
    obs = dict(outcome.entries)
    dual_sources = config.receivers  # their order defines the dual's bit indices
    entries = []
    for s in sorted(config.sources):  # the dual's receivers
        mask = 0
        for j, r in enumerate(dual_sources):
            if obs[r] >> config.source_index[s] & 1:
                mask |= 1 << j
        entries.append((s, mask))
    return Outcome("tree", tuple(entries))


def dual_histogram(config: Configuration, hist: OutcomeHistogram) -> OutcomeHistogram:
    """Histogram over the dual configuration's outcomes (tree mode)."""
    out = OutcomeHistogram()
    for outcome, c in hist.counts.items():
        out.add(outcome_dual(config, outcome), c)
    return out

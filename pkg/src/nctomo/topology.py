"""Graph model for coded-probe monitoring configurations.

A monitoring setup is a directed multigraph with designated source and
receiver leaves.  This module covers structural validation of logical-link
graphs, the dual (all edges reversed, sources and receivers swapped),
per-link identifiability checking, orientation of undirected graphs into
identifiable DAGs, and exhaustive source-to-receiver path enumeration.
"""

from __future__ import annotations

import dataclasses
import random
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import networkx as nx


class TopologyError(ValueError):
    """Malformed graph input (self-loop, duplicate edge id, unknown node...)."""


@dataclass(frozen=True)
class Edge:
    id: str
    tail: str
    head: str


@dataclass(frozen=True)
class Topology:
    """A multigraph with stable string edge ids.

    ``directed=False`` marks an undirected graph whose (tail, head) pairs are
    just the two endpoints; such graphs are only used as input to
    :func:`orient`.
    """

    edges: tuple[Edge, ...]
    directed: bool = True

    def __post_init__(self):
        seen = set()
        for e in self.edges:
            if e.tail == e.head:
                raise TopologyError(f"self-loop on node {e.tail!r} (edge {e.id!r})")
            if e.id in seen:
                raise TopologyError(f"duplicate edge id {e.id!r}")
            seen.add(e.id)

    @cached_property
    def nodes(self) -> tuple[str, ...]:
        out = set()
        for e in self.edges:
            out.add(e.tail)
            out.add(e.head)
        return tuple(sorted(out))

    @cached_property
    def edge_by_id(self) -> dict[str, Edge]:
        return {e.id: e for e in self.edges}

    @cached_property
    def out_edges(self) -> dict[str, tuple[Edge, ...]]:
        out: dict[str, list[Edge]] = {n: [] for n in self.nodes}
        for e in self.edges:
            out[e.tail].append(e)
        return {n: tuple(v) for n, v in out.items()}

    @cached_property
    def in_edges(self) -> dict[str, tuple[Edge, ...]]:
        out: dict[str, list[Edge]] = {n: [] for n in self.nodes}
        for e in self.edges:
            out[e.head].append(e)
        return {n: tuple(v) for n, v in out.items()}

    def degree(self, node: str) -> int:
        return len(self.in_edges[node]) + len(self.out_edges[node])

    @cached_property
    def leaves(self) -> tuple[str, ...]:
        return tuple(n for n in self.nodes if self.degree(n) == 1)

    @cached_property
    def interior(self) -> tuple[str, ...]:
        return tuple(n for n in self.nodes if self.degree(n) > 1)

    def neighbors(self, node: str) -> tuple[str, ...]:
        ns = {e.head for e in self.out_edges[node]} | {e.tail for e in self.in_edges[node]}
        return tuple(sorted(ns))

    def is_connected(self) -> bool:
        if not self.nodes:
            return True
        seen = {self.nodes[0]}
        stack = [self.nodes[0]]
        while stack:
            n = stack.pop()
            for m in self.neighbors(n):
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        return len(seen) == len(self.nodes)

    def topological_order(self) -> tuple[str, ...]:
        """Topological sort of a directed graph; raises on cycles."""
        if not self.directed:
            raise TopologyError("topological order undefined for undirected graphs")
        indeg = {n: len(self.in_edges[n]) for n in self.nodes}
        ready = sorted(n for n, d in indeg.items() if d == 0)
        order: list[str] = []
        while ready:
            n = ready.pop(0)
            order.append(n)
            inserted = []
            for e in self.out_edges[n]:
                indeg[e.head] -= 1
                if indeg[e.head] == 0:
                    inserted.append(e.head)
            # keep deterministic node order without re-sorting everything
            for m in sorted(inserted):
                ready.append(m)
        if len(order) != len(self.nodes):
            raise TopologyError("graph contains a cycle")
        return tuple(order)

    def is_dag(self) -> bool:
        try:
            self.topological_order()
            return True
        except TopologyError:
            return False

    def reversed(self) -> "Topology":
        return Topology(tuple(Edge(e.id, e.head, e.tail) for e in self.edges), self.directed)

    def to_networkx(self) -> nx.MultiDiGraph:
        g = nx.MultiDiGraph()
        g.add_nodes_from(self.nodes)
        for e in self.edges:
            g.add_edge(e.tail, e.head, key=e.id)
        return g


# ---------------------------------------------------------------------------
# plain-text edge lists:  "<edge_id> <tail> <head>", '#' starts a comment
# ---------------------------------------------------------------------------

def parse_topology(text: str, directed: bool = True) -> Topology:
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise TopologyError(f"line {lineno}: expected '<edge_id> <tail> <head>', got {raw!r}")
        edges.append(Edge(*parts))
    return Topology(tuple(edges), directed=directed)


def load_topology(path, directed: bool = True) -> Topology:
    with open(path, encoding="utf-8") as f:
        return parse_topology(f.read(), directed=directed)


def format_topology(topology: Topology) -> str:
    lines = [f"{e.id} {e.tail} {e.head}" for e in topology.edges]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# logical-form validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    node: str
    rule: str
    detail: str


@dataclass(frozen=True)
class LogicalReport:
    ok: bool
    violations: tuple[Violation, ...]


def validate_logical(topology: Topology, terminals: Iterable[str] = ()) -> LogicalReport:
    """Check the logical-link conditions on interior nodes.

    Interior (non-leaf) nodes must have total degree >= 3 and, in directed
    graphs, in-degree >= 1 and out-degree >= 1.  Nodes listed in
    ``terminals`` are known probe endpoints and exempt, since a source or
    receiver may legitimately sit in the interior of the graph.  Violations
    are reported as data; nothing is raised.
    """
    terminals = set(terminals)
    violations = []
    for n in topology.interior:
        if n in terminals:
            continue
        deg = topology.degree(n)
        if deg < 3:
            violations.append(Violation(n, "interior-degree", f"degree {deg} < 3"))
        if topology.directed:
            if not topology.in_edges[n]:
                violations.append(Violation(n, "interior-in-degree", "in-degree 0"))
            if not topology.out_edges[n]:
                violations.append(Violation(n, "interior-out-degree", "out-degree 0"))
    return LogicalReport(ok=not violations, violations=tuple(violations))


# ---------------------------------------------------------------------------
# configurations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Configuration:
    """The triplet (graph, sources, receivers) that defines a monitoring run.

    Sources and receivers are ordered; the position of a source in
    ``sources`` is its probe-bit index in tree-mode outcomes.
    """

    topology: Topology
    sources: tuple[str, ...]
    receivers: tuple[str, ...]

    def __post_init__(self):
        if not self.topology.directed:
            raise TopologyError("configurations require a directed topology")
        nodes = set(self.topology.nodes)
        for s in self.sources:
            if s not in nodes:
                raise TopologyError(f"source {s!r} is not a graph node")
        for r in self.receivers:
            if r not in nodes:
                raise TopologyError(f"receiver {r!r} is not a graph node")
        if not self.sources:
            raise TopologyError("at least one source is required")
        if not self.receivers:
            raise TopologyError("at least one receiver is required")

    @cached_property
    def source_index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.sources)}

    @cached_property
    def coding_points(self) -> tuple[str, ...]:
        t = self.topology
        return tuple(n for n in t.nodes
                     if n not in self.sources and n not in self.receivers
                     and len(t.in_edges[n]) >= 2)

    @cached_property
    def branching_points(self) -> tuple[str, ...]:
        t = self.topology
        return tuple(n for n in t.nodes
                     if n not in self.sources and n not in self.receivers
                     and len(t.in_edges[n]) == 1 and len(t.out_edges[n]) >= 2)

    @cached_property
    def source_receiver_overlap(self) -> tuple[str, ...]:
        return tuple(s for s in self.sources if s in self.receivers)

    def leaves_are_terminals(self) -> bool:
        terms = set(self.sources) | set(self.receivers)
        return all(leaf in terms for leaf in self.topology.leaves)

    @cached_property
    def is_tree(self) -> bool:
        t = self.topology
        return t.is_connected() and len(t.edges) == len(t.nodes) - 1 and t.is_dag()

    @cached_property
    def is_tree_mode(self) -> bool:
        """Tree-mode: a directed tree whose leaves are exactly the sources and
        receivers and whose interior nodes are pure coding points (several
        in-edges, one out-edge) or pure branching points (one in-edge,
        several out-edges)."""
        t = self.topology
        if not self.is_tree or self.source_receiver_overlap:
            return False
        for s in self.sources:
            if len(t.in_edges[s]) != 0 or len(t.out_edges[s]) != 1:
                return False
        for r in self.receivers:
            if len(t.in_edges[r]) != 1 or len(t.out_edges[r]) != 0:
                return False
        terms = set(self.sources) | set(self.receivers)
        for n in t.nodes:
            if n in terms:
                continue
            i, o = len(t.in_edges[n]), len(t.out_edges[n])
            if not ((i >= 2 and o == 1) or (i == 1 and o >= 2)):
                return False
        return True

    # -- directed reachability ------------------------------------------------

    @cached_property
    def source_bits_reaching(self) -> dict[str, frozenset[int]]:
        """For each node, the set of source indices with a directed path to it."""
        out: dict[str, set[int]] = {n: set() for n in self.topology.nodes}
        for s in self.sources:
            out[s].add(self.source_index[s])
        for n in self.topology.topological_order():
            for e in self.topology.out_edges[n]:
                out[e.head] |= out[n]
        return {n: frozenset(v) for n, v in out.items()}

    @cached_property
    def receivers_reachable(self) -> dict[str, frozenset[str]]:
        """For each node, the receivers reachable from it along directed paths."""
        out: dict[str, set[str]] = {n: set() for n in self.topology.nodes}
        for r in self.receivers:
            out[r].add(r)
        for n in reversed(self.topology.topological_order()):
            for e in self.topology.out_edges[n]:
                out[n] |= out[e.head]
        return {n: frozenset(v) for n, v in out.items()}

    def edge_crossing(self, edge_id: str) -> tuple[frozenset[int], frozenset[str]]:
        """Source bits that can cross an edge and receivers that can observe them."""
        e = self.topology.edge_by_id[edge_id]
        return self.source_bits_reaching[e.tail], self.receivers_reachable[e.head]

    @cached_property
    def full_flow_edge(self) -> str | None:
        """The edge crossed by every source-to-receiver path, if one exists.

        Present exactly in "hourglass" trees, where all probes merge into a
        single coded stream before fanning back out.
        """
        if not self.is_tree:
            return None
        all_bits = frozenset(range(len(self.sources)))
        all_rcv = frozenset(self.receivers)
        for e in self.topology.edges:
            bits, rcv = self.edge_crossing(e.id)
            if bits == all_bits and rcv == all_rcv:
                return e.id
        return None


def dual(config: Configuration) -> Configuration:
    """The dual configuration: all edges reversed, sources and receivers swapped.

    Edge ids are preserved, so per-edge success probabilities carry over by id.
    """
    return Configuration(
        topology=config.topology.reversed(),
        sources=config.receivers,
        receivers=config.sources,
    )


# ---------------------------------------------------------------------------
# identifiability
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IdentifiabilityResult:
    identifiable: bool
    condition1: str | None  # "source" | "disjoint-paths" | "through-path" | None
    condition2: str | None  # "receiver" | "disjoint-paths" | "through-path" | None


_SUPER_SOURCE = "\x00S"
_SUPER_SINK = "\x00R"


def _unit_flow(topology: Topology, skip_edge: str, super_out: Iterable[str],
               target: str, reverse: bool) -> int:
    """Max flow with unit capacity on real edges, from a super node attached to
    ``super_out`` into ``target`` (or out of it when ``reverse``)."""
    g = nx.DiGraph()
    for e in topology.edges:
        if e.id == skip_edge:
            continue
        a, b = (e.head, e.tail) if reverse else (e.tail, e.head)
        if g.has_edge(a, b):
            g[a][b]["capacity"] += 1
        else:
            g.add_edge(a, b, capacity=1)
    for s in super_out:
        g.add_edge(_SUPER_SOURCE, s, capacity=len(topology.edges))
    if _SUPER_SOURCE not in g or target not in g:
        return 0
    return int(nx.maximum_flow_value(g, _SUPER_SOURCE, target))


def _reaches(topology: Topology, skip_edge: str, starts: Iterable[str],
             target: str, reverse: bool) -> bool:
    starts = set(starts)
    if target in starts:
        return True
    adj: dict[str, list[str]] = {}
    for e in topology.edges:
        if e.id == skip_edge:
            continue
        a, b = (e.head, e.tail) if reverse else (e.tail, e.head)
        adj.setdefault(a, []).append(b)
    stack = list(starts)
    seen = set(starts)
    while stack:
        n = stack.pop()
        for m in adj.get(n, ()):
            if m == target:
                return True
            if m not in seen:
                seen.add(m)
                stack.append(m)
    return False


def check_link_identifiable(config: Configuration, edge_id: str) -> IdentifiabilityResult:
    """Decide whether one link's success rate is recoverable from end-to-end
    observations, and report which structural clause makes each endpoint good.

    The tail must be a source, or be fed by two edge-disjoint source paths, or
    sit on a source-to-receiver through-path; the head must satisfy the mirror
    conditions.  All paths must avoid the link itself.  Edge-disjointness is
    decided by unit-capacity max-flow (flow value >= 2).
    """
    if edge_id not in config.topology.edge_by_id:
        raise TopologyError(f"unknown edge id {edge_id!r}")
    e = config.topology.edge_by_id[edge_id]
    t = config.topology

    def cond(node: str, terminal_set: Sequence[str], incoming: bool) -> str | None:
        if node in terminal_set:
            return "source" if incoming else "receiver"
        flow = _unit_flow(t, edge_id, terminal_set, node, reverse=not incoming)
        if flow >= 2:
            return "disjoint-paths"
        src_ok = _reaches(t, edge_id, config.sources, node, reverse=False)
        rcv_ok = _reaches(t, edge_id, config.receivers, node, reverse=True)
        if src_ok and rcv_ok:
            return "through-path"
        return None

    c1 = cond(e.tail, config.sources, incoming=True)
    c2 = cond(e.head, config.receivers, incoming=False)
    return IdentifiabilityResult(bool(c1 and c2), c1, c2)


# ---------------------------------------------------------------------------
# orientation of undirected graphs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrientationStats:
    n_receivers: int
    n_coding_points: int
    links_per_path: float
    paths_per_link: float
    edge_disjoint_paths: int


@dataclass(frozen=True)
class OrientationResult:
    config: Configuration
    stats: OrientationStats
    source_receiver_overlap: tuple[str, ...]


def orient(topology: Topology, sources: Sequence[str], seed: int = 0) -> OrientationResult:
    """Orient an undirected logical graph into an acyclic monitoring DAG.

    Starting from the sources, nodes are visited one at a time and all their
    still-undirected edges are pointed outward; nodes that run out of unset
    edges before being visited become receivers.  Among candidates, the node
    with the fewest unset edges wins, then the one closest (hop distance) to
    the sources; remaining ties are broken by a PRNG seeded with ``seed`` so
    runs are reproducible.
    """
    if topology.directed:
        raise TopologyError("orient expects an undirected topology")
    if not sources:
        raise TopologyError("at least one source is required")
    nodeset = set(topology.nodes)
    for s in sources:
        if s not in nodeset:
            raise TopologyError(f"source {s!r} is not a graph node")
    if not topology.is_connected():
        raise TopologyError("orientation requires a connected graph")

    rng = random.Random(seed)
    sources = tuple(dict.fromkeys(sources))
    # hop distance from the source set, on the undirected graph
    dist = {s: 0 for s in sources}
    frontier = list(sources)
    while frontier:
        nxt = []
        for n in frontier:
            for m in topology.neighbors(n):
                if m not in dist:
                    dist[m] = dist[n] + 1
                    nxt.append(m)
        frontier = nxt

    direction: dict[str, tuple[str, str]] = {}  # edge id -> (tail, head)

    def unset_edges(node: str) -> list[Edge]:
        out = []
        for e in topology.in_edges[node] + topology.out_edges[node]:
            if e.id not in direction:
                out.append(e)
        return out

    def other(e: Edge, node: str) -> str:
        return e.head if e.tail == node else e.tail

    for s in sources:
        for e in sorted(unset_edges(s), key=lambda e: e.id):
            direction[e.id] = (s, other(e, s))

    receivers = [s for s in sources
                 if any(direction[e.id][1] == s
                        for e in topology.in_edges[s] + topology.out_edges[s]
                        if e.id in direction)]
    v1 = set(sources)
    v2 = {other(e, n) for n in v1 for e in topology.in_edges[n] + topology.out_edges[n]
          if other(e, n) not in v1}

    while v2:
        done = sorted(n for n in v2 if not unset_edges(n))
        for r in done:
            receivers.append(r)
            v2.discard(r)
        if not v2:
            break
        fewest = min(len(unset_edges(n)) for n in v2)
        u1 = [n for n in v2 if len(unset_edges(n)) == fewest]
        closest = min(dist[n] for n in u1)
        u2 = sorted(n for n in u1 if dist[n] == closest)
        v_star = u2[0] if len(u2) == 1 else rng.choice(u2)
        for e in sorted(unset_edges(v_star), key=lambda e: e.id):
            w = other(e, v_star)
            if w not in v1:
                direction[e.id] = (v_star, w)
        v1.add(v_star)
        v2.discard(v_star)
        for e in topology.in_edges[v_star] + topology.out_edges[v_star]:
            w = other(e, v_star)
            if w not in v1:
                v2.add(w)

    oriented = Topology(
        tuple(Edge(e.id, *direction[e.id]) for e in topology.edges), directed=True)
    receiver_set = {r for r in receivers}
    receiver_set |= {n for n in oriented.nodes if not oriented.out_edges[n]}
    config = Configuration(oriented, sources=sources,
                           receivers=tuple(sorted(receiver_set)))

    paths = enumerate_paths(config)
    stats = OrientationStats(
        n_receivers=len(config.receivers),
        n_coding_points=len(config.coding_points),
        links_per_path=paths.mean_links_per_path,
        paths_per_link=paths.mean_paths_per_link,
        edge_disjoint_paths=_merged_edge_disjoint(config),
    )
    return OrientationResult(config, stats, config.source_receiver_overlap)


def _merged_edge_disjoint(config: Configuration) -> int:
    g = nx.DiGraph()
    cap = len(config.topology.edges)
    for e in config.topology.edges:
        if g.has_edge(e.tail, e.head):
            g[e.tail][e.head]["capacity"] += 1
        else:
            g.add_edge(e.tail, e.head, capacity=1)
    for s in config.sources:
        g.add_edge(_SUPER_SOURCE, s, capacity=cap)
    for r in config.receivers:
        g.add_edge(r, _SUPER_SINK, capacity=cap)
    if _SUPER_SOURCE not in g or _SUPER_SINK not in g:
        return 0
    return int(nx.maximum_flow_value(g, _SUPER_SOURCE, _SUPER_SINK))


# ---------------------------------------------------------------------------
# path enumeration
# ---------------------------------------------------------------------------

Triplet = tuple[str, str, str]  # (source, receiver, receiver in-edge id)


@dataclass(frozen=True)
class PathSet:
    """All source-to-receiver directed paths, grouped by
    (source, receiver, receiver-in-edge) triplet.

    Paths are edge-id tuples in lexicographic order within each triplet.
    """

    triplets: dict[Triplet, tuple[tuple[str, ...], ...]] = field(default_factory=dict)

    @cached_property
    def all_paths(self) -> tuple[tuple[str, ...], ...]:
        out = []
        for key in sorted(self.triplets):
            out.extend(self.triplets[key])
        return tuple(out)

    @cached_property
    def paths_through(self) -> dict[str, tuple[int, ...]]:
        """Edge id -> indices into :attr:`all_paths` of the paths crossing it."""
        out: dict[str, list[int]] = {}
        for i, p in enumerate(self.all_paths):
            for eid in p:
                out.setdefault(eid, []).append(i)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def max_paths_per_triplet(self) -> int:
        return max((len(v) for v in self.triplets.values()), default=0)

    @cached_property
    def mean_links_per_path(self) -> float:
        if not self.all_paths:
            return 0.0
        return sum(len(p) for p in self.all_paths) / len(self.all_paths)

    @cached_property
    def mean_paths_per_link(self) -> float:
        edges = self.paths_through
        if not edges:
            return 0.0
        return sum(len(v) for v in edges.values()) / len(edges)


def enumerate_paths(config: Configuration) -> PathSet:
    """Exhaustively enumerate directed source-to-receiver paths.

    Requires an acyclic configuration; raises :class:`TopologyError` on a
    cycle since path enumeration would be unbounded.
    """
    t = config.topology
    t.topological_order()  # raises on cycles
    receivers = set(config.receivers)
    triplets: dict[Triplet, list[tuple[str, ...]]] = {}

    def walk(node: str, acc: list[str]):
        if node in receivers and acc:
            s, r, e_r = acc[0], node, acc[-1]
            src = t.edge_by_id[acc[0]].tail
            triplets.setdefault((src, r, e_r), []).append(tuple(acc))
        for e in sorted(t.out_edges[node], key=lambda e: e.id):
            acc.append(e.id)
            walk(e.head, acc)
            acc.pop()

    for s in config.sources:
        walk(s, [])
    return PathSet({k: tuple(sorted(v)) for k, v in sorted(triplets.items())})

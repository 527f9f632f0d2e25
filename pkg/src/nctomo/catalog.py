"""Built-in example topologies.

``tree5``, ``tree9`` and ``tree45`` are the standard small benchmarks used
throughout the test-suite and exposed by the CLI; ``backbone10`` is a
synthetic 10-node, 15-link backbone-style DAG with one source, one receiver
and seven source-to-receiver paths, handy for exercising the code-design
machinery on a non-tree graph.
"""

from __future__ import annotations

from .topology import Configuration, Edge, Topology, orient


def make_tree5() -> Configuration:
    """Five links: sources A and B merge at C, the coded stream crosses CD and
    fans out at D to receivers E and F."""
    edges = (
        Edge("AC", "A", "C"),
        Edge("BC", "B", "C"),
        Edge("CD", "C", "D"),
        Edge("DE", "D", "E"),
        Edge("DF", "D", "F"),
    )
    return Configuration(Topology(edges), sources=("A", "B"), receivers=("E", "F"))


def make_tree5_undirected() -> Topology:
    return Topology(
        tuple(Edge(e.id, e.tail, e.head) for e in make_tree5().topology.edges),
        directed=False,
    )


def make_tree9() -> Configuration:
    """Nine links, two sources (nodes 1 and 2), four receivers (7, 8, 9, 10).

    Probes branch before they meet: node 3 splits source 1's probe toward
    receiver 7 and toward the coding point 4, node 5 splits source 2's probe
    toward 4 and toward the subtree over receivers 9 and 10.
    """
    edges = (
        Edge("e1", "4", "8"),
        Edge("e2", "3", "7"),
        Edge("e3", "1", "3"),
        Edge("e4", "2", "5"),
        Edge("e5", "6", "10"),
        Edge("e6", "6", "9"),
        Edge("e7", "3", "4"),
        Edge("e8", "5", "4"),
        Edge("e9", "5", "6"),
    )
    return Configuration(Topology(edges), sources=("1", "2"),
                         receivers=("7", "8", "9", "10"))


_TREE45_DEFAULT_SOURCES = ("F15", "F18")


def make_tree45_undirected() -> Topology:
    """A 45-link tree: hub C with neighbors A, B, D, then three levels of
    binary fan-out down to 24 leaves F1..F24.

    Edge ids are e01..e45; e43, e44, e45 are the three hub links CA, CB, CD.
    """
    ordered: list[tuple[str, str]] = []
    for i in range(1, 13):  # e01..e24: leaf edges
        ordered.append((f"D{i}", f"F{2 * i - 1}"))
        ordered.append((f"D{i}", f"F{2 * i}"))
    for i in range(1, 7):  # e25..e36: second-level fan-out
        ordered.append((f"C{i}", f"D{2 * i - 1}"))
        ordered.append((f"C{i}", f"D{2 * i}"))
    for top, (left, right) in (("B", ("C1", "C2")), ("A", ("C3", "C4")),
                               ("D", ("C5", "C6"))):  # e37..e42
        ordered.append((top, left))
        ordered.append((top, right))
    edges = [Edge(f"e{i:02d}", u, v) for i, (u, v) in enumerate(ordered, start=1)]
    edges += [Edge("e43", "C", "A"), Edge("e44", "C", "B"), Edge("e45", "C", "D")]
    assert len(edges) == 45
    return Topology(tuple(edges), directed=False)


def make_tree45(sources: tuple[str, ...] = _TREE45_DEFAULT_SOURCES) -> Configuration:
    """The 45-link tree oriented for a given source set (default two sources
    on opposite sides of the hub, meeting at C)."""
    return orient(make_tree45_undirected(), sources, seed=0).config


def make_backbone10() -> Configuration:
    """A 10-node, 15-link DAG: source node 1 fans out on three edges, probes
    re-merge at four coding points, and receiver node 9 collects on three
    in-edges.  Seven source-to-receiver paths; at most three share one
    receiver in-edge."""
    edges = (
        Edge("E1", "1", "6"),
        Edge("E2", "1", "2"),
        Edge("E3", "1", "3"),
        Edge("E4", "2", "3"),
        Edge("E5", "2", "4"),
        Edge("E6", "3", "5"),
        Edge("E7", "4", "5"),
        Edge("E8", "4", "10"),
        Edge("E9", "5", "9"),
        Edge("E10", "6", "7"),
        Edge("E11", "6", "8"),
        Edge("E12", "7", "9"),
        Edge("E13", "10", "7"),
        Edge("E14", "10", "8"),
        Edge("E15", "8", "9"),
    )
    return Configuration(Topology(edges), sources=("1",), receivers=("9",))


NAMED_TOPOLOGIES = {
    "tree5": make_tree5,
    "tree9": make_tree9,
    "tree45": make_tree45,
}

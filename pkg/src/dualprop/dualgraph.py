"""Dual graphs and arc-labeled dual join-graphs over sets of functions.

A node is a cluster of one or more functions (CPTs or relations) with the
union of their scopes; an arc carries a label, a subset of the endpoint
scope intersection. A valid dual join-graph satisfies the running
intersection property: for every variable, the arcs whose label contains it
connect all nodes whose scope contains it.

Graphs are immutable after construction and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .model import BayesNetwork, Cpt, Relation, Table


def _scope_of(fn) -> tuple[int, ...]:
    if isinstance(fn, (Cpt, Table)):
        return tuple(sorted(fn.scope))
    if isinstance(fn, Relation):
        return tuple(sorted(fn.scope))
    raise TypeError(f"not a function payload: {type(fn)!r}")


@dataclass(frozen=True)
class Arc:
    u: int
    v: int
    label: frozenset


@dataclass(frozen=True)
class DualJoinGraph:
    functions: tuple
    clusters: tuple[tuple[int, ...], ...]
    arcs: tuple[Arc, ...]

    @property
    def n_nodes(self) -> int:
        return len(self.clusters)

    def scope(self, u: int) -> tuple[int, ...]:
        vs: set[int] = set()
        for f in self.clusters[u]:
            vs.update(_scope_of(self.functions[f]))
        return tuple(sorted(vs))

    def scopes(self) -> list[tuple[int, ...]]:
        return [self.scope(u) for u in range(self.n_nodes)]

    def neighbors(self, u: int) -> tuple[int, ...]:
        out = set()
        for a in self.arcs:
            if a.u == u:
                out.add(a.v)
            elif a.v == u:
                out.add(a.u)
        return tuple(sorted(out))

    def arc_label(self, u: int, v: int) -> frozenset:
        for a in self.arcs:
            if (a.u, a.v) in ((u, v), (v, u)):
                return a.label
        raise KeyError(f"no arc between {u} and {v}")

    @property
    def is_tree(self) -> bool:
        return is_join_tree(self)


def build_dual_graph(functions: Sequence, ) -> DualJoinGraph:
    """One node per function, an arc between any two scope-sharing nodes,
    labeled with the full scope intersection."""
    if not functions:
        raise ValueError("need at least one function")
    scopes = [set(_scope_of(f)) for f in functions]
    arcs = []
    for u in range(len(functions)):
        for v in range(u + 1, len(functions)):
            shared = scopes[u] & scopes[v]
            if shared:
                arcs.append(Arc(u, v, frozenset(shared)))
    return DualJoinGraph(
        tuple(functions), tuple((i,) for i in range(len(functions))), tuple(arcs)
    )


def singleton_join_graph(bn: BayesNetwork) -> DualJoinGraph:
    """One node per family, nodes in topological order of their child.

    For every parent p of a child c there is an arc between the two family
    nodes labeled {p}. The construction always yields singleton labels; the
    connectedness invariant is re-checked defensively because every parent
    variable induces a star of arcs centered at its own family node.
    """
    order = bn.topological_order()
    node_of_child = {c: k for k, c in enumerate(order)}
    functions = tuple(bn.cpts[c] for c in order)
    arcs = []
    for c in order:
        for p in bn.parents(c):
            u, v = node_of_child[c], node_of_child[p]
            arcs.append(Arc(min(u, v), max(u, v), frozenset({p})))
    seen = {}
    for a in arcs:
        key = (a.u, a.v)
        seen[key] = Arc(a.u, a.v, seen[key].label | a.label) if key in seen else a
    g = DualJoinGraph(
        functions,
        tuple((i,) for i in range(len(functions))),
        tuple(seen[k] for k in sorted(seen)),
    )
    if not check_connectedness(g):
        raise AssertionError("singleton construction broke connectedness")
    return g


def _components(n: int, edges: list[tuple[int, int]]) -> list[int]:
    comp = list(range(n))

    def find(x):
        while comp[x] != x:
            comp[x] = comp[comp[x]]
            x = comp[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            comp[ra] = rb
    return [find(i) for i in range(n)]


def check_connectedness(g: DualJoinGraph) -> bool:
    """Running intersection: per variable, its labeled arcs span its nodes."""
    scopes = g.scopes()
    variables = set()
    for s in scopes:
        variables.update(s)
    for x in variables:
        holders = [u for u in range(g.n_nodes) if x in scopes[u]]
        if len(holders) <= 1:
            continue
        edges = [(a.u, a.v) for a in g.arcs if x in a.label]
        comp = _components(g.n_nodes, edges)
        if len({comp[u] for u in holders}) > 1:
            return False
    return True


def is_join_tree(g: DualJoinGraph) -> bool:
    """True when the arc set is acyclic and connects every scope-sharing pair."""
    comp = _components(g.n_nodes, [(a.u, a.v) for a in g.arcs])
    if len(g.arcs) != g.n_nodes - len(set(comp)):
        return False
    scopes = [set(s) for s in g.scopes()]
    for u in range(g.n_nodes):
        for v in range(u + 1, g.n_nodes):
            if scopes[u] & scopes[v] and comp[u] != comp[v]:
                return False
    return True


def validate_cluster_join_graph(g: DualJoinGraph) -> bool:
    """Function coverage, label containment and connectedness all hold."""
    used = [f for cluster in g.clusters for f in cluster]
    if sorted(used) != list(range(len(g.functions))):
        return False
    scopes = g.scopes()
    for a in g.arcs:
        if a.u == a.v or not (0 <= a.u < g.n_nodes and 0 <= a.v < g.n_nodes):
            return False
        if not a.label:
            return False
        if not a.label <= (set(scopes[a.u]) & set(scopes[a.v])):
            return False
    return check_connectedness(g)


def sweep_schedule(g: DualJoinGraph, node_order: Sequence[int] | None = None):
    """Directed arcs for one iteration: node order forward, then reversed.

    Each processed node sends to all its neighbors in ascending id order.
    """
    order = list(node_order) if node_order is not None else list(range(g.n_nodes))
    out = []
    for u in order:
        out.extend((u, v) for v in g.neighbors(u))
    for u in reversed(order):
        out.extend((u, v) for v in g.neighbors(u))
    return out


def dump_graph(g: DualJoinGraph) -> str:
    """Plain-text dump used for golden-file comparisons and --graph file."""
    lines = [f"nodes {g.n_nodes}"]
    for u in range(g.n_nodes):
        fns = " ".join(str(f) for f in g.clusters[u])
        scope = " ".join(str(v) for v in g.scope(u))
        lines.append(f"node {u} functions {fns} scope {scope}")
    lines.append(f"arcs {len(g.arcs)}")
    for a in g.arcs:
        label = " ".join(str(v) for v in sorted(a.label))
        lines.append(f"arc {a.u} {a.v} label {label}")
    return "\n".join(lines) + "\n"


def load_graph(text: str, functions: Sequence) -> DualJoinGraph:
    """Parse a dump produced by dump_graph; functions are supplied separately."""
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0][0] != "nodes":
        raise ValueError("graph file must start with 'nodes <N>'")
    n = int(lines[0][1])
    clusters: list[tuple[int, ...]] = [()] * n
    arcs: list[Arc] = []
    for parts in lines[1:]:
        if parts[0] == "node":
            u = int(parts[1])
            k = parts.index("scope")
            clusters[u] = tuple(int(x) for x in parts[3:k])
        elif parts[0] == "arc":
            u, v = int(parts[1]), int(parts[2])
            label = frozenset(int(x) for x in parts[parts.index("label") + 1 :])
            arcs.append(Arc(u, v, label))
        elif parts[0] == "arcs":
            continue
        else:
            raise ValueError(f"unrecognized line: {' '.join(parts)}")
    g = DualJoinGraph(tuple(functions), tuple(clusters), tuple(arcs))
    if not validate_cluster_join_graph(g):
        raise ValueError("graph file violates the join-graph invariants")
    return g

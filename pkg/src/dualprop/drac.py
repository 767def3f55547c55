"""Arc-consistency engines over constraint networks and dual join-graphs.

``run_binary_ac`` is the classic domain-filtering algorithm for unary and
binary constraint networks. ``run_drac`` is its relational generalization:
nodes exchange relations over arc labels (join incoming messages with the
node's relation, project onto the label) until a fixpoint. Messages start as
universal relations over the labels.

Two message modes exist. ``eq4`` joins every incoming message including the
recipient's own previous message; ``noecho`` excludes the recipient, mirroring
belief propagation exactly so the two engines can be compared send-by-send.
Both modes reach the same fixpoint, a fact the test suite asserts.

Relations are held as dense boolean tables; removed tuples and traces are
enumerated in mixed-radix order for deterministic reporting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dualgraph import (
    DualJoinGraph,
    build_dual_graph,
    sweep_schedule,
    validate_cluster_join_graph,
)
from .model import (
    ConstraintNetwork,
    Relation,
    Table,
    Variable,
    as_evidence,
    function_table,
    mixed_radix_assignments,
    ones_table,
    relation_from_table,
    table_product,
)


def function_tuple_bound(graph: DualJoinGraph, variables) -> int:
    """t*r with t the largest pre-restriction function table and r the
    function count; an upper bound on the sweeps needed to reach a fixpoint."""
    cards = {v.id: v.card for v in variables}
    t = 1
    for fn in graph.functions:
        scope = function_table(fn, variables, boolean=True).scope
        size = 1
        for v in scope:
            size *= cards[v]
        t = max(t, size)
    return t * len(graph.functions)


@dataclass
class AcState:
    relations: list[Relation]
    removed: list[dict]
    messages: dict
    induced_domains: dict
    sweeps: int
    steps: int
    fixpoint: bool
    bound: int

    @property
    def consistent(self) -> bool:
        return all(r.tuples for r in self.relations) and all(
            d for d in self.induced_domains.values()
        )

    def removal_trace(self) -> list[tuple[int, int, tuple]]:
        """(step, node, tuple) rows sorted by step then node then tuple."""
        rows = []
        for u, book in enumerate(self.removed):
            for tup, step in book.items():
                rows.append((step, u, tup))
        return sorted(rows)


class DracEngine:
    """Distributed relational arc-consistency over a dual join-graph."""

    def __init__(
        self,
        graph: DualJoinGraph,
        variables,
        evidence=None,
        mode: str = "eq4",
        node_order=None,
    ):
        if not validate_cluster_join_graph(graph):
            raise ValueError("invalid dual join-graph")
        if mode not in ("eq4", "noecho"):
            raise ValueError(f"unknown mode {mode!r}")
        self.graph = graph
        self.variables = variables
        self.evidence = as_evidence(evidence)
        self.mode = mode
        self.cards = {v.id: v.card for v in variables}

        e_idx = self.evidence.to_indices(variables)
        self.node_tables: list[Table] = []
        for cluster in graph.clusters:
            fts = [
                function_table(graph.functions[f], variables, boolean=True).restrict(
                    e_idx
                )
                for f in cluster
            ]
            self.node_tables.append(table_product(fts))

        self.neighbors = {u: graph.neighbors(u) for u in range(graph.n_nodes)}
        self.labels: dict[tuple[int, int], tuple[int, ...]] = {}
        for a in graph.arcs:
            label = tuple(sorted(x for x in a.label if x not in e_idx))
            self.labels[(a.u, a.v)] = label
            self.labels[(a.v, a.u)] = label

        self.messages: dict[tuple[int, int], Table] = {}
        for u in range(graph.n_nodes):
            for v in self.neighbors[u]:
                self.messages[(u, v)] = ones_table(
                    self.labels[(u, v)], self.cards, dtype=np.bool_
                )

        self.node_order = (
            list(node_order) if node_order is not None else list(range(graph.n_nodes))
        )
        self.schedule = sweep_schedule(graph, self.node_order)
        self.current: list[Table] = [t for t in self.node_tables]
        self.removed: list[dict] = [dict() for _ in range(graph.n_nodes)]
        self.step = 0
        self.sweeps = 0
        self.fixpoint = False
        self.bound = function_tuple_bound(graph, variables)

    # -- messages -------------------------------------------------------------

    def _incoming(self, u: int, skip: int | None, store=None) -> list[Table]:
        store = self.messages if store is None else store
        return [store[(w, u)] for w in self.neighbors[u] if w != skip]

    def compute_message(self, u: int, v: int, store=None) -> Table:
        skip = v if self.mode == "noecho" else None
        prod = table_product([self.node_tables[u]] + self._incoming(u, skip, store))
        return prod.eliminate(set(prod.scope) - set(self.labels[(u, v)]))

    def send(self, u: int, v: int) -> bool:
        """Send u->v; refresh v's current relation and removal book."""
        self.step += 1
        new = self.compute_message(u, v)
        changed = not np.array_equal(new.values, self.messages[(u, v)].values)
        self.messages[(u, v)] = new
        if changed:
            self._refresh_current(v)
        return changed

    def _refresh_current(self, v: int) -> None:
        cur = table_product([self.node_tables[v]] + self._incoming(v, None))
        prev = self.current[v].values
        if (cur.values & ~prev).any():
            raise RuntimeError("relation grew during propagation")
        lost = prev & ~cur.values
        if lost.any():
            book = self.removed[v]
            cards = [self.cards[x] for x in cur.scope]
            for idx in mixed_radix_assignments(cards):
                if lost[idx]:
                    tup = tuple(
                        self.variables[x].domain[i] for x, i in zip(cur.scope, idx)
                    )
                    book.setdefault(tup, self.step)
        self.current[v] = cur

    def sweep(self, synchronous: bool = False) -> bool:
        """One pass over the schedule; synchronous sweeps compute every
        message from the values held at the start of the sweep."""
        self.sweeps += 1
        changed = False
        if synchronous:
            snap = dict(self.messages)
            pending = {}
            for (u, v) in self.schedule:
                pending[(u, v)] = self.compute_message(u, v, store=snap)
            for (u, v), new in pending.items():
                self.step += 1
                if not np.array_equal(new.values, self.messages[(u, v)].values):
                    changed = True
                    self.messages[(u, v)] = new
                    self._refresh_current(v)
            return changed
        for (u, v) in self.schedule:
            changed |= self.send(u, v)
        return changed

    def run(self, max_sweeps: int | None = None) -> "DracEngine":
        cap = self.bound if max_sweeps is None else max_sweeps
        for _ in range(cap):
            if not self.sweep():
                self.fixpoint = True
                break
        return self

    # -- summaries --------------------------------------------------------------

    def induced_domains(self) -> dict[int, set]:
        """Per-variable values supported by every node relation containing it;
        observed variables keep their singleton."""
        out: dict[int, set] = {}
        for var, lab in self.evidence.items():
            out[var] = {lab}
        for u in range(self.graph.n_nodes):
            cur = self.current[u]
            for var in cur.scope:
                proj = cur.marginal_onto((var,))
                vals = {
                    self.variables[var].domain[i]
                    for i in range(self.cards[var])
                    if bool(proj.values[i])
                }
                out[var] = vals if var not in out else (out[var] & vals)
        return out

    def state(self) -> AcState:
        rels = [relation_from_table(t, self.variables) for t in self.current]
        msgs = {
            k: relation_from_table(t, self.variables) for k, t in self.messages.items()
        }
        return AcState(
            relations=rels,
            removed=[dict(b) for b in self.removed],
            messages=msgs,
            induced_domains=self.induced_domains(),
            sweeps=self.sweeps,
            steps=self.step,
            fixpoint=self.fixpoint,
            bound=self.bound,
        )


def drac_message(state: DracEngine, i: int, j: int) -> Relation:
    """The relation node i currently sends to node j."""
    return relation_from_table(state.compute_message(i, j), state.variables)


def absorb_singleton_unaries(cn: ConstraintNetwork):
    """Split a constraint network into assignment-style unary relations
    (treated as evidence) and the remaining relations."""
    evid: dict[int, object] = {}
    rest: list[Relation] = []
    for rel in cn.relations:
        if rel.arity == 1 and len(rel.tuples) == 1:
            evid[rel.scope[0]] = next(iter(rel.tuples))[0]
        else:
            rest.append(rel)
    return evid, rest


def run_drac(
    network,
    schedule=None,
    mode: str = "eq4",
    variables=None,
    evidence=None,
    max_sweeps: int | None = None,
) -> AcState:
    """Fixpoint of distributed relational arc-consistency.

    Accepts a ConstraintNetwork (its full dual graph is built, after folding
    singleton unary relations into the evidence, mirroring how observed
    variables are processed on the probabilistic side) or an explicit
    DualJoinGraph plus variables. When given a network, its current_domains
    are updated with the induced domains.
    """
    cn = None
    if isinstance(network, ConstraintNetwork):
        cn = network
        variables = cn.variables
        evid, rest = absorb_singleton_unaries(cn)
        e = dict(as_evidence(evidence).assignments)
        e.update(evid)
        evidence = e
        if not rest:
            domains = {v.id: {e[v.id]} if v.id in e else set(v.domain) for v in variables}
            state = AcState([], [], {}, domains, 0, 0, True, 0)
            cn.current_domains = [domains[v.id] for v in variables]
            return state
        graph = build_dual_graph(rest)
    elif isinstance(network, DualJoinGraph):
        if variables is None:
            raise ValueError("variables are required with an explicit graph")
        graph = network
    else:
        raise TypeError(f"cannot run on {type(network)!r}")
    engine = DracEngine(graph, variables, evidence, mode=mode, node_order=schedule)
    engine.run(max_sweeps)
    state = engine.state()
    if cn is not None:
        for v in cn.variables:
            cn.current_domains[v.id] = set(state.induced_domains.get(v.id, v.domain))
    return state


# ---------------------------------------------------------------------------
# Classic binary arc-consistency
# ---------------------------------------------------------------------------


@dataclass
class BinaryAcState:
    domains: dict
    removed: dict
    rounds: int

    @property
    def consistent(self) -> bool:
        return all(d for d in self.domains.values())


def binary_ac_message(rel: Relation, d_from: set, from_var: int, to_var: int) -> set:
    """Values of to_var with a supporting value of from_var in the relation."""
    ia = rel.scope.index(from_var)
    ib = rel.scope.index(to_var)
    return {t[ib] for t in rel.tuples if t[ia] in d_from}


def binary_ac_step(relations, domains: dict) -> dict:
    """One synchronized round; returns the newly filtered domains."""
    new = {v: set(d) for v, d in domains.items()}
    for rel in relations:
        if rel.arity != 2:
            continue
        a, b = rel.scope
        new[b] &= binary_ac_message(rel, domains[a], a, b)
        new[a] &= binary_ac_message(rel, domains[b], b, a)
    return new


def run_binary_ac(cn: ConstraintNetwork) -> BinaryAcState:
    """Iterate binary arc-consistency to its fixpoint (binary/unary networks).

    Unary relations are applied once up front (round 0). The network's
    current_domains are updated in place.
    """
    for rel in cn.relations:
        if rel.arity > 2:
            raise ValueError(
                f"relation over {rel.scope} is not binary; use run_drac instead"
            )
    domains = {v.id: set(cn.current_domains[v.id]) for v in cn.variables}
    removed: dict[int, dict] = {v.id: {} for v in cn.variables}
    for rel in cn.relations:
        if rel.arity == 1:
            var = rel.scope[0]
            allowed = {t[0] for t in rel.tuples}
            for lab in sorted(domains[var] - allowed, key=repr):
                removed[var][lab] = 0
            domains[var] &= allowed
    rounds = 0
    while True:
        rounds += 1
        new = binary_ac_step(cn.relations, domains)
        changed = False
        for var in domains:
            for lab in sorted(domains[var] - new[var], key=repr):
                removed[var].setdefault(lab, rounds)
                changed = True
        domains = new
        if not changed:
            break
    for v in cn.variables:
        cn.current_domains[v.id] = set(domains[v.id])
    return BinaryAcState(domains=domains, removed=removed, rounds=rounds)


# ---------------------------------------------------------------------------
# Tractable-class detectors
# ---------------------------------------------------------------------------


def _domain_positions(variables, scope):
    return [
        {lab: k for k, lab in enumerate(variables[v].domain)} for v in scope
    ]


def is_max_closed(obj, variables=None) -> bool:
    """Closure of every tuple set under componentwise maximum.

    The maximum is taken in each variable's declared domain order.
    """
    if isinstance(obj, ConstraintNetwork):
        return all(is_max_closed(rel, obj.variables) for rel in obj.relations)
    rel: Relation = obj
    if variables is None:
        raise ValueError("variables are required to order the domains")
    pos = _domain_positions(variables, rel.scope)
    doms = [variables[v].domain for v in rel.scope]
    tuples = rel.sorted_tuples()
    for i, t1 in enumerate(tuples):
        for t2 in tuples[i:]:
            m = tuple(
                d[max(p[a], p[b])] for a, b, p, d in zip(t1, t2, pos, doms)
            )
            if m not in rel.tuples:
                return False
    return True


@dataclass
class MaxSolution:
    assignment: dict | None
    satisfied: bool
    state: AcState


def max_solution(cn: ConstraintNetwork, graph=None, mode: str = "eq4") -> MaxSolution:
    """Arc-consistency followed by the per-variable maxima.

    On a Max-closed network with no emptied domain the maxima form a
    solution; otherwise the candidate is returned with satisfied=False.
    """
    if graph is not None:
        state = run_drac(graph, mode=mode, variables=cn.variables)
    else:
        state = run_drac(cn, mode=mode)
    if any(not d for d in state.induced_domains.values()):
        return MaxSolution(None, False, state)
    assignment = {}
    for v in cn.variables:
        dom = state.induced_domains.get(v.id, set(v.domain))
        assignment[v.id] = max(dom, key=v.domain.index)
    ok = all(
        tuple(assignment[v] for v in rel.scope) in rel.tuples for rel in cn.relations
    )
    return MaxSolution(assignment, ok, state)


def is_implicational(cn: ConstraintNetwork) -> bool:
    """Every value of either endpoint of every binary relation is consistent
    with exactly one or with all values of the other endpoint."""
    for rel in cn.relations:
        if rel.arity > 2:
            raise ValueError(f"relation over {rel.scope} is not binary")
        if rel.arity != 2:
            continue
        a, b = rel.scope
        for x, y in ((a, b), (b, a)):
            dom_other = cn.current_domains[y]
            for lab in cn.current_domains[x]:
                support = binary_ac_message(rel, {lab}, x, y) & dom_other
                if len(support) not in (1, len(dom_other)):
                    return False
    return True

"""Iterative belief propagation over arc-labeled dual join-graphs.

One iteration processes every node in the schedule order and back. A node u
sends to each neighbor v the table obtained by multiplying u's
evidence-restricted functions with every incoming message except v's and
summing out all variables outside the arc label. Messages start as all-ones
tables, are rescaled to unit mass after each computation (a positive rescale
can neither create nor destroy zeros), and beliefs are normalized at read
time.

Alongside the float messages the engine propagates a boolean shadow with the
identical mechanics. The shadow carries exactly the zeros implied by the
input tables, so a float zero whose shadow entry is still true must have been
produced by arithmetic underflow; zero reports carry that provenance tag.

In sequential mode a message may consume messages produced earlier in the
same sweep. Synchronous mode computes every message of a sweep from the
previous sweep's values; both are deterministic for a fixed schedule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dualgraph import DualJoinGraph, sweep_schedule, validate_cluster_join_graph
from .model import (
    Cpt,
    Table,
    as_evidence,
    function_table,
    mixed_radix_assignments,
    ones_table,
    table_product,
)

DEFAULT_TOL = 1e-10


class InvariantError(RuntimeError):
    """A runtime invariant of the propagation was violated."""


@dataclass(frozen=True)
class ZeroRecord:
    iteration: int
    provenance: str  # "input" or "underflow"


@dataclass(frozen=True)
class Belief:
    scope: tuple[int, ...]
    values: np.ndarray
    all_zero: bool


class IbpEngine:
    """Mutable propagation state over a fixed graph, evidence and schedule."""

    def __init__(
        self,
        graph: DualJoinGraph,
        variables,
        evidence=None,
        mode: str = "sequential",
        normalize: bool = True,
        track_provenance: bool = True,
        node_order=None,
    ):
        if not validate_cluster_join_graph(graph):
            raise ValueError("invalid dual join-graph")
        if mode not in ("sequential", "synchronous"):
            raise ValueError(f"unknown mode {mode!r}")
        self.graph = graph
        self.variables = variables
        self.evidence = as_evidence(evidence)
        self.mode = mode
        self.normalize = normalize
        self.track_provenance = track_provenance
        self.cards = {v.id: v.card for v in variables}

        e_idx = self.evidence.to_indices(variables)
        self.node_tables: list[Table] = []
        self.shadow_tables: list[Table] = []
        for cluster in graph.clusters:
            fts = [
                function_table(graph.functions[f], variables).restrict(e_idx)
                for f in cluster
            ]
            self.node_tables.append(table_product(fts))
            bts = [
                function_table(graph.functions[f], variables, boolean=True).restrict(
                    e_idx
                )
                for f in cluster
            ]
            self.shadow_tables.append(table_product(bts))

        self.neighbors = {u: graph.neighbors(u) for u in range(graph.n_nodes)}
        self.labels: dict[tuple[int, int], tuple[int, ...]] = {}
        for a in graph.arcs:
            label = tuple(sorted(x for x in a.label if x not in e_idx))
            self.labels[(a.u, a.v)] = label
            self.labels[(a.v, a.u)] = label

        self.messages: dict[tuple[int, int], Table] = {}
        self.shadow: dict[tuple[int, int], Table] = {}
        for u in range(graph.n_nodes):
            for v in self.neighbors[u]:
                label = self.labels[(u, v)]
                self.messages[(u, v)] = ones_table(label, self.cards)
                self.shadow[(u, v)] = ones_table(label, self.cards, dtype=np.bool_)

        self.node_order = (
            list(node_order) if node_order is not None else list(range(graph.n_nodes))
        )
        self.schedule = sweep_schedule(graph, self.node_order)
        self.iteration = 0
        self.family_zeros: dict = {}
        self.variable_zeros: dict = {}
        self.log: list[dict] = []
        self.value_converged = False
        self.zero_converged = False

        # function index owning each unobserved variable's belief
        self._owner: dict[int, int] = {}
        self._node_of_function: dict[int, int] = {}
        for u, cluster in enumerate(graph.clusters):
            for f in cluster:
                self._node_of_function[f] = u
        for f, fn in enumerate(graph.functions):
            if isinstance(fn, Cpt) and fn.child not in e_idx:
                self._owner[fn.child] = f

    # -- message computation ------------------------------------------------

    def _incoming(self, u: int, skip: int | None, store: dict) -> list[Table]:
        return [store[(w, u)] for w in self.neighbors[u] if w != skip]

    def compute_message(self, u: int, v: int, store=None) -> Table:
        """Product of u's functions with all incoming messages except v's,
        summed down to the (evidence-reduced) arc label."""
        store = self.messages if store is None else store
        prod = table_product([self.node_tables[u]] + self._incoming(u, v, store))
        label = self.labels[(u, v)]
        msg = prod.eliminate(set(prod.scope) - set(label))
        return msg.normalized() if self.normalize else msg

    def _compute_shadow(self, u: int, v: int, store=None) -> Table:
        store = self.shadow if store is None else store
        prod = table_product([self.shadow_tables[u]] + self._incoming(u, v, store))
        return prod.eliminate(set(prod.scope) - set(self.labels[(u, v)]))

    def send(self, u: int, v: int) -> float:
        """Compute, store and return the max absolute change of message u->v."""
        new = self.compute_message(u, v)
        old = self.messages[(u, v)]
        delta = float(np.max(np.abs(new.values - old.values))) if new.values.size else 0.0
        self.messages[(u, v)] = new
        if self.track_provenance:
            self.shadow[(u, v)] = self._compute_shadow(u, v)
        return delta

    def sweep(self) -> dict:
        """One full iteration over the schedule; updates beliefs and zeros."""
        self.iteration += 1
        shadow_before = {k: t.values.copy() for k, t in self.shadow.items()}
        if self.mode == "synchronous":
            snap_m = dict(self.messages)
            snap_s = dict(self.shadow)
            delta = 0.0
            new_m, new_s = {}, {}
            for (u, v) in self.schedule:
                msg = self.compute_message(u, v, store=snap_m)
                old = snap_m[(u, v)]
                if msg.values.size:
                    delta = max(delta, float(np.max(np.abs(msg.values - old.values))))
                new_m[(u, v)] = msg
                if self.track_provenance:
                    new_s[(u, v)] = self._compute_shadow(u, v, store=snap_s)
            self.messages.update(new_m)
            self.shadow.update(new_s)
        else:
            delta = 0.0
            for (u, v) in self.schedule:
                delta = max(delta, self.send(u, v))
        zero_changed = self._update_zero_sets()
        shadow_stable = all(
            np.array_equal(shadow_before[k], self.shadow[k].values) for k in self.shadow
        )
        entry = {
            "iteration": self.iteration,
            "max_delta": delta,
            "zeros": self.zero_count(),
            "zero_changed": zero_changed,
            "shadow_stable": shadow_stable,
        }
        self.log.append(entry)
        return entry

    def run(self, max_iterations: int, tol: float = DEFAULT_TOL) -> "IbpEngine":
        if max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        for _ in range(max_iterations):
            entry = self.sweep()
            self.value_converged = entry["max_delta"] < tol
            self.zero_converged = not entry["zero_changed"] and entry["shadow_stable"]
            if self.value_converged and self.zero_converged:
                break
        return self

    # -- beliefs and zero bookkeeping ----------------------------------------

    def _cluster_belief(self, u: int, boolean: bool = False) -> Table:
        store = self.shadow if boolean else self.messages
        base = self.shadow_tables[u] if boolean else self.node_tables[u]
        return table_product([base] + self._incoming(u, None, store))

    def _family_scope(self, f: int) -> tuple[int, ...]:
        fn = self.graph.functions[f]
        scope = fn.scope if isinstance(fn, Cpt) else tuple(sorted(fn.scope))
        return tuple(v for v in scope if v not in self.evidence)

    def family_belief_raw(self, f: int) -> tuple[Table, Table]:
        """Unnormalized family belief and its boolean shadow."""
        u = self._node_of_function[f]
        scope = self._family_scope(f)
        raw = self._cluster_belief(u).marginal_onto(scope)
        shadow = self._cluster_belief(u, boolean=True).marginal_onto(scope)
        return raw, shadow

    def family_belief(self, key) -> Belief:
        """Normalized belief over a family, keyed by child variable (CPT
        payloads) or function index; all-zero beliefs are flagged, not
        divided by zero."""
        f = self._resolve_function(key)
        raw, _ = self.family_belief_raw(f)
        total = float(raw.values.sum())
        if total == 0.0:
            return Belief(raw.scope, np.zeros_like(raw.values), True)
        return Belief(raw.scope, raw.values / total, False)

    def variable_belief(self, var: int) -> Belief:
        if var in self.evidence:
            raise ValueError(f"variable {var} is observed")
        f = self._owner.get(var)
        if f is None:
            f = next(
                i
                for i, fn in enumerate(self.graph.functions)
                if var in set(self._family_scope(i))
            )
        raw, _ = self.family_belief_raw(f)
        raw = raw.marginal_onto((var,))
        total = float(raw.values.sum())
        if total == 0.0:
            return Belief(raw.scope, np.zeros_like(raw.values), True)
        return Belief(raw.scope, raw.values / total, False)

    def _resolve_function(self, key) -> int:
        for f, fn in enumerate(self.graph.functions):
            if isinstance(fn, Cpt) and fn.child == key:
                return f
        if 0 <= key < len(self.graph.functions):
            return key
        raise KeyError(f"no family for key {key!r}")

    def _zero_key(self, f: int):
        fn = self.graph.functions[f]
        return fn.child if isinstance(fn, Cpt) else f

    def _update_zero_sets(self) -> bool:
        """Record newly determined zeros; returns whether anything changed.

        A family zero is an assignment whose family belief is exactly 0.0
        while its parent slice still carries positive mass, i.e. the child is
        determined impossible given those parent values. Families whose child
        is observed determine nothing. Variable zeros are values whose
        unnormalized marginal belief is exactly 0.0. Once recorded, a zero
        must remain a zero of the joint belief; a violation raises.
        """
        changed = False
        for f, fn in enumerate(self.graph.functions):
            if not isinstance(fn, Cpt) or fn.child in self.evidence:
                continue
            raw, shadow = self.family_belief_raw(f)
            parent_scope = tuple(v for v in raw.scope if v != fn.child)
            parent_marg = raw.eliminate({fn.child})
            child_axis = raw.scope.index(fn.child)
            book = self.family_zeros.setdefault(self._zero_key(f), {})
            changed |= self._record_family_zeros(
                book, raw, shadow, parent_marg, child_axis
            )
        for var, f in self._owner.items():
            raw, shadow = self.family_belief_raw(f)
            raw = raw.marginal_onto((var,))
            shadow = shadow.marginal_onto((var,))
            book = self.variable_zeros.setdefault(var, {})
            changed |= self._record_variable_zeros(book, raw, shadow)
        return changed

    def _labels_at(self, scope, idx) -> tuple:
        return tuple(self.variables[v].domain[i] for v, i in zip(scope, idx))

    def _record_family_zeros(self, book, raw, shadow, parent_marg, child_axis) -> bool:
        cards = [self.cards[v] for v in raw.scope]
        changed = False
        for idx in mixed_radix_assignments(cards):
            zero_now = float(raw.values[idx]) == 0.0
            key = self._labels_at(raw.scope, idx)
            if not zero_now:
                if key in book:
                    raise InvariantError(
                        f"zero {key} reverted at iteration {self.iteration}"
                    )
                continue
            if key in book:
                continue
            pidx = idx[:child_axis] + idx[child_axis + 1 :]
            if float(parent_marg.values[pidx]) == 0.0:
                continue
            prov = "underflow" if bool(shadow.values[idx]) else "input"
            book[key] = ZeroRecord(self.iteration, prov)
            changed = True
        return changed

    def _record_variable_zeros(self, book, raw, shadow) -> bool:
        changed = False
        for i in range(raw.values.size):
            key = self.variables[raw.scope[0]].domain[i]
            if float(raw.values[i]) != 0.0:
                if key in book:
                    raise InvariantError(
                        f"zero {key} reverted at iteration {self.iteration}"
                    )
                continue
            if key not in book:
                prov = "underflow" if bool(shadow.values[i]) else "input"
                book[key] = ZeroRecord(self.iteration, prov)
                changed = True
        return changed

    def zero_count(self) -> int:
        return sum(len(b) for b in self.family_zeros.values()) + sum(
            len(b) for b in self.variable_zeros.values()
        )

    # -- spec-facing summaries ------------------------------------------------

    @property
    def zero_tuples(self) -> dict:
        return {"families": self.family_zeros, "variables": self.variable_zeros}

    @property
    def beliefs(self) -> dict:
        fams = {
            self._zero_key(f): self.family_belief(self._zero_key(f))
            for f in range(len(self.graph.functions))
        }
        vars_ = {var: self.variable_belief(var) for var in sorted(self._owner)}
        return {"families": fams, "variables": vars_}


def init_messages(graph: DualJoinGraph, variables, evidence=None, **kwargs) -> IbpEngine:
    """Initialized state: all-ones messages over evidence-reduced labels."""
    return IbpEngine(graph, variables, evidence, **kwargs)


def compute_message(state: IbpEngine, u: int, v: int) -> Table:
    return state.compute_message(u, v)


def run_ibp(
    graph: DualJoinGraph,
    variables,
    evidence=None,
    max_iterations: int = 50,
    schedule=None,
    mode: str = "sequential",
    tol: float = DEFAULT_TOL,
) -> IbpEngine:
    """Run full sweeps until both values and the zero set are stable."""
    engine = IbpEngine(graph, variables, evidence, mode=mode, node_order=schedule)
    return engine.run(max_iterations, tol=tol)


def family_belief(state: IbpEngine, key) -> Belief:
    return state.family_belief(key)


def variable_belief(state: IbpEngine, var: int) -> Belief:
    return state.variable_belief(var)


def zero_set(state: IbpEngine) -> dict:
    """Per-family and per-variable zeros with first iteration and provenance."""
    return state.zero_tuples

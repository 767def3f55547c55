"""Core data model: variables, dense tables, CPTs, relations and networks.

Tables are dense numpy arrays indexed by the mixed-radix encoding of scope
assignments. Inside the engines every scope is kept in ascending variable-id
order, which makes alignment a pure reshape/broadcast. Float tables carry
probabilities, boolean tables carry relations; the same algebra serves both
(product is multiplication or conjunction, elimination is summation or
existential projection).

All model objects are immutable after construction except
``ConstraintNetwork.current_domains``, which propagation engines may update.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

CPT_NORMALIZATION_TOL = 1e-9
DESK_SCALE_LIMIT = 10_000_000


class SizeGuardError(RuntimeError):
    """An exact computation would exceed the desk-scale size guard."""


@dataclass(frozen=True)
class Variable:
    """A discrete variable with a fixed, ordered domain of value labels."""

    id: int
    name: str
    domain: tuple

    def __post_init__(self):
        if len(self.domain) < 1:
            raise ValueError(f"variable {self.name}: empty domain")
        if len(set(self.domain)) != len(self.domain):
            raise ValueError(f"variable {self.name}: duplicate domain values")

    @property
    def card(self) -> int:
        return len(self.domain)

    def index_of(self, label) -> int:
        try:
            return self.domain.index(label)
        except ValueError:
            raise ValueError(f"{label!r} not in domain of {self.name}") from None


def make_variables(cards: Sequence[int], prefix: str = "x") -> tuple[Variable, ...]:
    """Variables 0..n-1 with integer label domains 0..card-1."""
    return tuple(
        Variable(i, f"{prefix}{i}", tuple(range(c))) for i, c in enumerate(cards)
    )


@dataclass(frozen=True)
class Evidence:
    """An instantiated subset of variables, mapping variable id to a label."""

    assignments: Mapping[int, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "assignments", dict(self.assignments))

    def __contains__(self, var: int) -> bool:
        return var in self.assignments

    def __len__(self) -> int:
        return len(self.assignments)

    def __bool__(self) -> bool:
        return bool(self.assignments)

    def items(self):
        return self.assignments.items()

    def get(self, var: int, default=None):
        return self.assignments.get(var, default)

    def to_indices(self, variables: Sequence[Variable]) -> dict[int, int]:
        return {v: variables[v].index_of(lab) for v, lab in self.assignments.items()}


def as_evidence(e) -> Evidence:
    if e is None:
        return Evidence({})
    if isinstance(e, Evidence):
        return e
    return Evidence(e)


# ---------------------------------------------------------------------------
# Dense tables over ascending scopes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Table:
    """A dense function over an ascending tuple of variable ids.

    ``values.shape`` matches the cardinalities of the scope variables in
    order. A 0-d array represents a function over the empty scope.
    """

    scope: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        if any(a >= b for a, b in zip(self.scope, self.scope[1:])):
            raise ValueError(f"scope not strictly ascending: {self.scope}")
        if self.values.ndim != len(self.scope):
            raise ValueError("table rank does not match scope length")

    @property
    def is_bool(self) -> bool:
        return self.values.dtype == np.bool_

    def _expand_to(self, scope: tuple[int, ...]) -> np.ndarray:
        shape = tuple(
            self.values.shape[self.scope.index(v)] if v in self.scope else 1
            for v in scope
        )
        return self.values.reshape(shape)

    def product(self, other: "Table") -> "Table":
        scope = tuple(sorted(set(self.scope) | set(other.scope)))
        a = self._expand_to(scope)
        b = other._expand_to(scope)
        vals = (a & b) if (self.is_bool and other.is_bool) else (a * b)
        return Table(scope, vals)

    def eliminate(self, drop: Iterable[int]) -> "Table":
        """Sum out (or existentially project out, for boolean tables)."""
        drop = set(drop)
        axes = tuple(i for i, v in enumerate(self.scope) if v in drop)
        if not axes:
            return self
        vals = self.values.any(axis=axes) if self.is_bool else self.values.sum(axis=axes)
        scope = tuple(v for v in self.scope if v not in drop)
        return Table(scope, vals)

    def marginal_onto(self, keep: Iterable[int]) -> "Table":
        keep = set(keep)
        return self.eliminate(v for v in self.scope if v not in keep)

    def restrict(self, evidence_idx: Mapping[int, int]) -> "Table":
        """Fix evidence variables to their observed value index and drop them."""
        if not any(v in evidence_idx for v in self.scope):
            return self
        index = tuple(
            evidence_idx[v] if v in evidence_idx else slice(None) for v in self.scope
        )
        scope = tuple(v for v in self.scope if v not in evidence_idx)
        return Table(scope, self.values[index])

    def normalized(self) -> "Table":
        """Rescale to total mass 1; an all-zero table is returned unchanged."""
        total = float(self.values.sum())
        if total == 0.0:
            return self
        return Table(self.scope, self.values / total)


def table_product(tables: Sequence[Table]) -> Table:
    if not tables:
        raise ValueError("empty product")
    out = tables[0]
    for t in tables[1:]:
        out = out.product(t)
    return out


def ones_table(scope: tuple[int, ...], cards: Mapping[int, int], dtype=np.float64) -> Table:
    shape = tuple(cards[v] for v in scope)
    return Table(scope, np.ones(shape, dtype=dtype))


def mixed_radix_assignments(cards: Sequence[int]) -> Iterator[tuple[int, ...]]:
    """All index tuples in row-major (mixed-radix) order."""
    return itertools.product(*(range(c) for c in cards))


# ---------------------------------------------------------------------------
# CPTs, relations, networks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cpt:
    """Conditional probability table for one child given its parents.

    ``values`` has shape (card(parent 1), ..., card(parent k), card(child)),
    the row-major layout used by the text format.
    """

    child: int
    parents: tuple[int, ...]
    values: np.ndarray

    @property
    def family(self) -> tuple[int, ...]:
        return self.parents + (self.child,)

    @property
    def scope(self) -> tuple[int, ...]:
        return tuple(sorted(self.family))

    def table(self) -> Table:
        order = np.argsort(self.family, kind="stable")
        return Table(self.scope, np.transpose(self.values, order))


@dataclass(frozen=True)
class Relation:
    """A set of allowed assignments over an ordered scope, by value label."""

    scope: tuple[int, ...]
    tuples: frozenset

    def __post_init__(self):
        object.__setattr__(self, "tuples", frozenset(self.tuples))
        for t in self.tuples:
            if len(t) != len(self.scope):
                raise ValueError(f"tuple {t} has wrong arity for scope {self.scope}")

    @property
    def arity(self) -> int:
        return len(self.scope)

    def sorted_tuples(self) -> list[tuple]:
        return sorted(self.tuples)

    def to_table(self, variables: Sequence[Variable]) -> Table:
        scope = tuple(sorted(self.scope))
        order = [self.scope.index(v) for v in scope]
        shape = tuple(variables[v].card for v in scope)
        vals = np.zeros(shape, dtype=np.bool_)
        for t in self.tuples:
            idx = tuple(variables[self.scope[j]].index_of(t[j]) for j in order)
            vals[idx] = True
        return Table(scope, vals)


def relation_from_table(table: Table, variables: Sequence[Variable]) -> Relation:
    """Enumerate the support of a boolean table in mixed-radix order."""
    cards = [variables[v].card for v in table.scope]
    tuples = []
    for idx in mixed_radix_assignments(cards):
        if bool(table.values[idx]):
            tuples.append(
                tuple(variables[v].domain[i] for v, i in zip(table.scope, idx))
            )
    return Relation(table.scope, frozenset(tuples))


@dataclass(frozen=True)
class BayesNetwork:
    """A directed network with one CPT per variable; cpts[i].child == i."""

    variables: tuple[Variable, ...]
    cpts: tuple[Cpt, ...]

    @property
    def n(self) -> int:
        return len(self.variables)

    def parents(self, i: int) -> tuple[int, ...]:
        return self.cpts[i].parents

    def cards(self) -> dict[int, int]:
        return {v.id: v.card for v in self.variables}

    def topological_order(self) -> list[int]:
        """Kahn's algorithm with lowest-id tie-breaking; raises on a cycle."""
        children: dict[int, list[int]] = {i: [] for i in range(self.n)}
        indeg = [0] * self.n
        for c in range(self.n):
            for p in self.parents(c):
                children[p].append(c)
                indeg[c] += 1
        ready = sorted(i for i in range(self.n) if indeg[i] == 0)
        order: list[int] = []
        while ready:
            u = min(ready)
            ready.remove(u)
            order.append(u)
            for c in children[u]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        if len(order) != self.n:
            raise ValueError("network graph has a directed cycle")
        return order


@dataclass
class ConstraintNetwork:
    """Variables, relations and the per-variable domains still considered viable."""

    variables: tuple[Variable, ...]
    relations: tuple[Relation, ...]
    current_domains: list[set] = None

    def __post_init__(self):
        if self.current_domains is None:
            self.current_domains = [set(v.domain) for v in self.variables]

    @property
    def n(self) -> int:
        return len(self.variables)

    def cards(self) -> dict[int, int]:
        return {v.id: v.card for v in self.variables}


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}


def validate(bn: BayesNetwork) -> ValidationReport:
    """Check ids, acyclicity, scopes and per-column CPT normalization."""
    out: list[Violation] = []
    ids = [v.id for v in bn.variables]
    if ids != list(range(len(ids))):
        out.append(Violation("ids", f"variable ids not dense 0..n-1: {ids}"))
        return ValidationReport(tuple(out))
    if len(bn.cpts) != bn.n:
        out.append(Violation("scope", "need exactly one CPT per variable"))
        return ValidationReport(tuple(out))
    for i, cpt in enumerate(bn.cpts):
        name = bn.variables[i].name
        if cpt.child != i:
            out.append(Violation("scope", f"cpts[{i}] has child {cpt.child}"))
            continue
        if len(set(cpt.family)) != len(cpt.family):
            out.append(Violation("scope", f"{name}: repeated variable in family"))
            continue
        expect = tuple(bn.variables[p].card for p in cpt.parents) + (
            bn.variables[i].card,
        )
        if cpt.values.shape != expect:
            out.append(
                Violation("shape", f"{name}: table shape {cpt.values.shape} != {expect}")
            )
            continue
        if np.any(cpt.values < 0):
            out.append(Violation("negative", f"{name}: negative table entry"))
        sums = cpt.values.sum(axis=-1)
        bad = np.abs(sums - 1.0) > CPT_NORMALIZATION_TOL
        if np.any(bad):
            out.append(
                Violation(
                    "normalization",
                    f"{name}: {int(bad.sum())} parent assignment(s) do not sum to 1",
                )
            )
    try:
        bn.topological_order()
    except ValueError:
        out.append(Violation("cycle", "directed cycle in the graph"))
    return ValidationReport(tuple(out))


# ---------------------------------------------------------------------------
# Joint probability and evidence restriction
# ---------------------------------------------------------------------------


def joint_probability(bn: BayesNetwork, assignment: Mapping[int, object]) -> float:
    """Product of CPT entries at a full assignment (by value label)."""
    missing = [v.name for v in bn.variables if v.id not in assignment]
    if missing:
        raise ValueError(f"assignment misses variables: {missing}")
    idx = {v.id: v.index_of(assignment[v.id]) for v in bn.variables}
    p = 1.0
    for cpt in bn.cpts:
        pos = tuple(idx[q] for q in cpt.parents) + (idx[cpt.child],)
        p *= float(cpt.values[pos])
    return p


def restrict_table(table, evidence, variables: Sequence[Variable]):
    """Fix observed variables and drop them from the scope.

    Probabilities are not renormalized. A restricted CPT is returned as a
    plain Table since its column structure is gone; a Relation stays a
    Relation.
    """
    e = as_evidence(evidence)
    if isinstance(table, Relation):
        hit = [j for j, v in enumerate(table.scope) if v in e]
        if not hit:
            return table
        keep = [j for j in range(table.arity) if j not in hit]
        tuples = frozenset(
            tuple(t[j] for j in keep)
            for t in table.tuples
            if all(t[j] == e.get(table.scope[j]) for j in hit)
        )
        return Relation(tuple(table.scope[j] for j in keep), tuples)
    if isinstance(table, Cpt):
        table = table.table()
    return table.restrict(e.to_indices(variables))


def function_table(fn, variables: Sequence[Variable], boolean: bool = False) -> Table:
    """Dense table of a CPT, relation or table payload.

    With ``boolean=True`` the result is the strict-positivity indicator, the
    per-function building block of the flat constraint view.
    """
    if isinstance(fn, Cpt):
        t = fn.table()
        return Table(t.scope, t.values > 0.0) if boolean else t
    if isinstance(fn, Relation):
        t = fn.to_table(variables)
        return t if boolean else Table(t.scope, t.values.astype(np.float64))
    if isinstance(fn, Table):
        if boolean:
            return fn if fn.is_bool else Table(fn.scope, fn.values > 0.0)
        return Table(fn.scope, fn.values.astype(np.float64)) if fn.is_bool else fn
    raise TypeError(f"not a function payload: {type(fn)!r}")


def joint_table(bn: BayesNetwork, evidence=None) -> Table:
    """Dense joint over the unobserved variables, guarded at desk scale."""
    e = as_evidence(evidence)
    size = 1
    for v in bn.variables:
        if v.id not in e:
            size *= v.card
        if size > DESK_SCALE_LIMIT:
            raise SizeGuardError(
                f"joint over unobserved variables exceeds {DESK_SCALE_LIMIT} entries"
            )
    factors = [restrict_table(cpt, e, bn.variables) for cpt in bn.cpts]
    cards = bn.cards()
    full_scope = tuple(v.id for v in bn.variables if v.id not in e)
    out = ones_table(full_scope, cards)
    for f in factors:
        out = out.product(f)
    return out

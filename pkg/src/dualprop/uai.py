"""Text formats: networks (BAYES / CONSTRAINT preamble), evidence, orders.

The network format is the usual whitespace-tokenized layout: preamble,
variable count, cardinalities, function count, one scope line per function
(size followed by variable ids, child last for BAYES), then each function's
entry count and entries in row-major mixed-radix order. Floats are written
with shortest round-trip repr so write -> read -> write is byte identical.

Reading produces variables with integer labels 0..card-1; original labels
are not part of the format.
"""

from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

from .model import (
    BayesNetwork,
    ConstraintNetwork,
    Cpt,
    Evidence,
    Relation,
    Variable,
    make_variables,
    mixed_radix_assignments,
)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_bayes(bn: BayesNetwork) -> str:
    lines = ["BAYES", str(bn.n), " ".join(str(v.card) for v in bn.variables), str(bn.n)]
    for cpt in bn.cpts:
        scope = cpt.parents + (cpt.child,)
        lines.append(" ".join([str(len(scope))] + [str(v) for v in scope]))
    lines.append("")
    for cpt in bn.cpts:
        flat = cpt.values.reshape(-1)
        lines.append(str(flat.size))
        lines.append(" ".join(_fmt(x) for x in flat))
    return "\n".join(lines) + "\n"


def write_constraint(cn: ConstraintNetwork) -> str:
    lines = [
        "CONSTRAINT",
        str(cn.n),
        " ".join(str(v.card) for v in cn.variables),
        str(len(cn.relations)),
    ]
    for rel in cn.relations:
        lines.append(" ".join([str(rel.arity)] + [str(v) for v in rel.scope]))
    lines.append("")
    for rel in cn.relations:
        cards = [cn.variables[v].card for v in rel.scope]
        size = int(np.prod(cards)) if cards else 1
        lines.append(str(size))
        allowed = {
            tuple(cn.variables[v].index_of(t[j]) for j, v in enumerate(rel.scope))
            for t in rel.tuples
        }
        bits = ["1" if idx in allowed else "0" for idx in mixed_radix_assignments(cards)]
        lines.append(" ".join(bits))
    return "\n".join(lines) + "\n"


def read_network(text: str):
    """Parse a network; returns BayesNetwork or ConstraintNetwork by preamble."""
    tokens = text.split()
    if not tokens:
        raise ValueError("empty network file")
    kind = tokens[0].upper()
    if kind not in ("BAYES", "CONSTRAINT"):
        raise ValueError(f"unsupported preamble {tokens[0]!r}")
    it = iter(tokens[1:])
    n = int(next(it))
    cards = [int(next(it)) for _ in range(n)]
    variables = make_variables(cards)
    nfun = int(next(it))
    scopes = []
    for _ in range(nfun):
        k = int(next(it))
        scopes.append(tuple(int(next(it)) for _ in range(k)))
    if kind == "BAYES":
        if nfun != n:
            raise ValueError("BAYES network needs one function per variable")
        cpt_by_child: dict[int, Cpt] = {}
        for scope in scopes:
            size = int(next(it))
            child = scope[-1]
            parents = scope[:-1]
            shape = tuple(cards[p] for p in parents) + (cards[child],)
            expect = int(np.prod(shape)) if shape else 1
            if size != expect:
                raise ValueError(f"function over {scope}: {size} entries, expected {expect}")
            vals = np.array([float(next(it)) for _ in range(size)]).reshape(shape)
            cpt_by_child[child] = Cpt(child, parents, vals)
        if sorted(cpt_by_child) != list(range(n)):
            raise ValueError("BAYES network needs exactly one CPT per variable")
        return BayesNetwork(variables, tuple(cpt_by_child[i] for i in range(n)))
    relations = []
    for scope in scopes:
        size = int(next(it))
        rel_cards = [cards[v] for v in scope]
        expect = int(np.prod(rel_cards)) if rel_cards else 1
        if size != expect:
            raise ValueError(f"relation over {scope}: {size} entries, expected {expect}")
        tuples = []
        for idx in itertools.product(*(range(c) for c in rel_cards)):
            if float(next(it)) != 0.0:
                tuples.append(idx)
        relations.append(Relation(scope, frozenset(tuples)))
    return ConstraintNetwork(variables, tuple(relations))


def write_evidence(evidence: Evidence, variables: Sequence[Variable]) -> str:
    items = sorted(evidence.to_indices(variables).items())
    parts = [str(len(items))] + [f"{v} {i}" for v, i in items]
    return "\n".join(parts) + "\n"


def read_evidence(text: str, variables: Sequence[Variable]) -> Evidence:
    tokens = text.split()
    if not tokens:
        return Evidence({})
    count = int(tokens[0])
    if len(tokens) != 1 + 2 * count:
        raise ValueError("malformed evidence file")
    assignments = {}
    for k in range(count):
        var = int(tokens[1 + 2 * k])
        idx = int(tokens[2 + 2 * k])
        assignments[var] = variables[var].domain[idx]
    return Evidence(assignments)


def write_order(order: Sequence[int]) -> str:
    return " ".join(str(v) for v in order) + "\n"


def read_order(text: str) -> list[int]:
    return [int(t) for t in text.split()]

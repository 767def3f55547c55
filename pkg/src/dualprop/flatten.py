"""Flattening: the constraint network of strictly positive CPT rows.

A directed network plus evidence induces a constraint network over the same
variables: one relation per family keeping exactly the rows with positive
probability, and one unary relation per evidence variable pinning its value.
A full tuple has positive posterior iff it satisfies every relation, so zero
analysis of the probabilistic network reduces to consistency in the flat one.

The positivity test is exact (> 0.0, no epsilon).
"""

from __future__ import annotations

import itertools

import numpy as np

from .model import (
    DESK_SCALE_LIMIT,
    BayesNetwork,
    ConstraintNetwork,
    Cpt,
    Relation,
    SizeGuardError,
    as_evidence,
    joint_probability,
)


def positive_rows(cpt: Cpt, variables) -> Relation:
    """Relation over the family (parents then child) of strictly positive rows."""
    scope = cpt.parents + (cpt.child,)
    doms = [variables[v].domain for v in scope]
    tuples = []
    for idx in itertools.product(*(range(len(d)) for d in doms)):
        if float(cpt.values[idx]) > 0.0:
            tuples.append(tuple(d[i] for d, i in zip(doms, idx)))
    return Relation(scope, frozenset(tuples))


def flatten(bn: BayesNetwork, evidence=None) -> ConstraintNetwork:
    """One relation per family plus a unary relation per evidence variable."""
    e = as_evidence(evidence)
    relations = [positive_rows(cpt, bn.variables) for cpt in bn.cpts]
    for var in sorted(e.assignments):
        relations.append(Relation((var,), frozenset({(e.get(var),)})))
    return ConstraintNetwork(bn.variables, tuple(relations))


def solutions(cn: ConstraintNetwork) -> frozenset:
    """Exhaustive enumeration of satisfying full assignments (desk scale).

    Assignments are tuples of value labels ordered by variable id.
    """
    size = 1
    for v in cn.variables:
        size *= len(cn.current_domains[v.id])
        if size > DESK_SCALE_LIMIT:
            raise SizeGuardError(
                f"assignment space exceeds {DESK_SCALE_LIMIT}; refusing to enumerate"
            )
    domains = [sorted(cn.current_domains[v.id], key=v.domain.index) for v in cn.variables]
    checks = [
        (rel, [cn.variables[v].id for v in rel.scope], rel.tuples) for rel in cn.relations
    ]
    out = []
    for assign in itertools.product(*domains):
        ok = True
        for _rel, scope_ids, tuples in checks:
            if tuple(assign[v] for v in scope_ids) not in tuples:
                ok = False
                break
        if ok:
            out.append(assign)
    return frozenset(out)


def verify_flat_equivalence(bn: BayesNetwork, evidence=None) -> bool:
    """Every evidence-consistent full tuple has positive joint probability
    exactly when it satisfies the flat network."""
    e = as_evidence(evidence)
    cn = flatten(bn, e)
    size = int(np.prod([v.card for v in bn.variables]))
    if size > DESK_SCALE_LIMIT:
        raise SizeGuardError("network too large for exhaustive equivalence check")
    sols = solutions(cn)
    for assign in itertools.product(*(v.domain for v in bn.variables)):
        if any(assign[var] != lab for var, lab in e.items()):
            continue
        positive = joint_probability(bn, dict(enumerate(assign))) > 0.0
        if positive != (assign in sols):
            return False
    return True

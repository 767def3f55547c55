"""Exact inference: brute-force enumeration and variable elimination.

Both oracles return per-variable and per-family posteriors plus the evidence
probability. Evidence with zero probability is a first-class "impossible"
result rather than an error, since hard flattened instances can rule out
every completion. Exact zeros survive both oracles bit-exactly: a zero
posterior entry is a sum of products each containing a true zero factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import (
    DESK_SCALE_LIMIT,
    BayesNetwork,
    SizeGuardError,
    Table,
    as_evidence,
    joint_table,
    restrict_table,
)


@dataclass
class PosteriorResult:
    variable_beliefs: dict  # var id -> np.ndarray over the full domain
    family_beliefs: dict  # child id -> Table over the evidence-reduced family
    p_evidence: float
    impossible: bool
    w_star: int | None = None
    order: list | None = None

    def variable_zero_values(self, variables) -> dict:
        """Value labels with exactly zero posterior, per unobserved variable."""
        out = {}
        for var, arr in self.variable_beliefs.items():
            zeros = {
                variables[var].domain[i]
                for i in range(arr.size)
                if float(arr[i]) == 0.0
            }
            if self.impossible:
                zeros = set(variables[var].domain)
            out[var] = zeros
        return out


def _package(bn, e, var_tables, fam_tables, p_e, w_star=None, order=None):
    impossible = p_e == 0.0
    var_beliefs = {}
    for var, t in var_tables.items():
        total = float(t.values.sum())
        var_beliefs[var] = t.values / total if total > 0.0 else np.zeros_like(t.values)
    for var, lab in e.items():
        onehot = np.zeros(bn.variables[var].card)
        if not impossible:
            onehot[bn.variables[var].index_of(lab)] = 1.0
        var_beliefs[var] = onehot
    fam_beliefs = {}
    for child, t in fam_tables.items():
        total = float(t.values.sum())
        vals = t.values / total if total > 0.0 else np.zeros_like(t.values)
        fam_beliefs[child] = Table(t.scope, vals)
    return PosteriorResult(var_beliefs, fam_beliefs, p_e, impossible, w_star, order)


def brute_force_posteriors(bn: BayesNetwork, evidence=None) -> PosteriorResult:
    """Posteriors by summing the dense joint (guarded at desk scale)."""
    e = as_evidence(evidence)
    joint = joint_table(bn, e)
    p_e = float(joint.values.sum())
    var_tables = {
        v.id: joint.marginal_onto((v.id,)) for v in bn.variables if v.id not in e
    }
    fam_tables = {}
    for cpt in bn.cpts:
        scope = tuple(v for v in cpt.scope if v not in e)
        fam_tables[cpt.child] = joint.marginal_onto(scope)
    return _package(bn, e, var_tables, fam_tables, p_e)


# ---------------------------------------------------------------------------
# Variable elimination
# ---------------------------------------------------------------------------


def min_degree_order(scopes, candidates) -> tuple[list[int], int]:
    """Min-degree elimination order over the interaction graph of the scopes.

    Returns (order, w_star) where w_star is the largest cluster minus one
    encountered while simulating the elimination. Ties break on variable id.
    """
    nodes = sorted(candidates)
    adj: dict[int, set[int]] = {v: set() for v in nodes}
    for scope in scopes:
        inside = [v for v in scope if v in adj]
        for i, a in enumerate(inside):
            for b in inside[i + 1 :]:
                adj[a].add(b)
                adj[b].add(a)
    order: list[int] = []
    w_star = 0
    remaining = set(nodes)
    while remaining:
        v = min(remaining, key=lambda x: (len(adj[x] & remaining), x))
        nbrs = adj[v] & remaining
        w_star = max(w_star, len(nbrs))
        for a in nbrs:
            for b in nbrs:
                if a != b:
                    adj[a].add(b)
        remaining.discard(v)
        order.append(v)
    return order, w_star


def induced_width(scopes, order) -> int:
    """Induced width of the given elimination order over the scopes."""
    adj: dict[int, set[int]] = {v: set() for v in order}
    for scope in scopes:
        inside = [v for v in scope if v in adj]
        for i, a in enumerate(inside):
            for b in inside[i + 1 :]:
                adj[a].add(b)
                adj[b].add(a)
    width = 0
    remaining = set(order)
    for v in order:
        nbrs = adj[v] & remaining
        width = max(width, len(nbrs))
        for a in nbrs:
            for b in nbrs:
                if a != b:
                    adj[a].add(b)
        remaining.discard(v)
    return width


def _eliminate_all_but(factors: list[Table], keep: set, order, cards) -> Table:
    """Sum-product elimination of every order variable outside keep."""
    live = list(factors)
    for v in order:
        if v in keep:
            continue
        touching = [f for f in live if v in f.scope]
        if not touching:
            continue
        rest = [f for f in live if v not in f.scope]
        prod = touching[0]
        for f in touching[1:]:
            prod = prod.product(f)
            if prod.values.size > DESK_SCALE_LIMIT:
                raise SizeGuardError(
                    "intermediate elimination table exceeds the desk-scale guard"
                )
        live = rest + [prod.eliminate({v})]
    out = Table((), np.array(1.0))
    for f in live:
        out = out.product(f)
        if out.values.size > DESK_SCALE_LIMIT:
            raise SizeGuardError("result table exceeds the desk-scale guard")
    return out


def variable_elimination(bn: BayesNetwork, evidence=None, order=None) -> PosteriorResult:
    """Posteriors by bucket elimination along a min-degree (or given) order."""
    e = as_evidence(evidence)
    factors = [restrict_table(cpt, e, bn.variables) for cpt in bn.cpts]
    scopes = [f.scope for f in factors]
    hidden = {v.id for v in bn.variables if v.id not in e}
    if order is None:
        order, w_star = min_degree_order(scopes, hidden)
    else:
        order = [v for v in order if v in hidden]
        if set(order) != hidden:
            raise ValueError("order must cover every unobserved variable")
        w_star = induced_width(scopes, order)
    cards = bn.cards()
    largest = 1
    for v in order:
        largest = max(largest, cards[v])
    if (max(cards.values(), default=2)) ** (w_star + 1) > DESK_SCALE_LIMIT:
        raise SizeGuardError(
            f"induced width {w_star} makes elimination exceed the desk-scale guard"
        )
    var_tables = {
        v: _eliminate_all_but(factors, {v}, order, cards) for v in sorted(hidden)
    }
    fam_tables = {}
    for cpt in bn.cpts:
        keep = {v for v in cpt.scope if v in hidden}
        fam_tables[cpt.child] = _eliminate_all_but(factors, keep, order, cards)
    p_e = float(_eliminate_all_but(factors, set(), order, cards).values)
    return _package(bn, e, var_tables, fam_tables, p_e, w_star, list(order))

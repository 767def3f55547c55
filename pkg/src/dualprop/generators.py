"""Seeded benchmark generators and hand-built fixture networks.

Every generator is a pure function of its parameters and seed. Fixtures are
exact, hard-coded instances used throughout the tests; they are reachable
both under short registry keys (ex2.2, ex3.1, ex4.4, ex4.6, fig1) and under
descriptive aliases.
"""

from __future__ import annotations

import itertools

import numpy as np

from .model import (
    BayesNetwork,
    ConstraintNetwork,
    Cpt,
    Evidence,
    Relation,
    Variable,
)

# ---------------------------------------------------------------------------
# Fixture helpers
# ---------------------------------------------------------------------------


def predicate_cpt(child: int, parents: tuple[int, ...], variables, pred) -> Cpt:
    """CPT uniform over the child values satisfying pred(child, parents...).

    Parent assignments with no satisfying child value get an all-zero column,
    so networks built this way can be deliberately deficient.
    """
    pcards = [variables[p].card for p in parents]
    ccard = variables[child].card
    vals = np.zeros(tuple(pcards) + (ccard,))
    for pidx in itertools.product(*(range(c) for c in pcards)):
        plabs = tuple(variables[p].domain[i] for p, i in zip(parents, pidx))
        allowed = [
            k for k in range(ccard) if pred(variables[child].domain[k], *plabs)
        ]
        for k in allowed:
            vals[pidx + (k,)] = 1.0 / len(allowed)
    return Cpt(child, parents, vals)


def _pair_constraint_cpt(child: int, parents: tuple[int, int], epsilon: float) -> Cpt:
    """Hidden-pair CPT of the 3-value coloring pattern.

    The hidden bit is (almost) surely 1 when the two parents are distinct
    non-3 values or both equal 3, and (almost) surely 0 otherwise; epsilon
    softens the 0/1 entries to epsilon and 1-epsilon.
    """
    vals = np.zeros((3, 3, 2))
    for i, xi in enumerate((1, 2, 3)):
        for j, xj in enumerate((1, 2, 3)):
            on = (xi != xj and xi != 3 and xj != 3) or (xi == xj == 3)
            p1 = (1.0 - epsilon) if on else epsilon
            vals[i, j, 1] = p1
            vals[i, j, 0] = 1.0 - p1
    return Cpt(child, parents, vals)


# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------


def _fixture_chain3():
    """Three-variable chain-and-collider network: A, B given A, C given A,B."""
    variables = (
        Variable(0, "A", (0, 1)),
        Variable(1, "B", (0, 1)),
        Variable(2, "C", (0, 1)),
    )
    cpts = (
        Cpt(0, (), np.array([0.6, 0.4])),
        Cpt(1, (0,), np.array([[0.7, 0.3], [0.2, 0.8]])),
        Cpt(
            2,
            (0, 1),
            np.array([[[0.5, 0.5], [0.9, 0.1]], [[0.3, 0.7], [0.25, 0.75]]]),
        ),
    )
    return BayesNetwork(variables, cpts), Evidence({})


def _fixture_coloring6():
    """Six-variable not-equal coloring network with a unique solution."""
    variables = (
        Variable(0, "A", (1, 2, 3)),
        Variable(1, "B", (1, 2, 3)),
        Variable(2, "C", (2,)),
        Variable(3, "D", (1, 2, 3)),
        Variable(4, "F", (1, 2, 3)),
        Variable(5, "G", (3,)),
    )
    dom = {v.id: v.domain for v in variables}

    def rel(scope, pred):
        tuples = [
            t for t in itertools.product(*(dom[v] for v in scope)) if pred(*t)
        ]
        return Relation(scope, frozenset(tuples))

    relations = (
        rel((5, 4, 3), lambda g, f, d: g != f and g != d and f != d),
        rel((4, 2, 1), lambda f, c, b: f != c and f != b and c != b),
        rel((3, 1, 0), lambda d, b, a: d != b and d != a and b != a),
        rel((1, 0), lambda b, a: b != a),
        rel((2, 0), lambda c, a: c != a),
        rel((0,), lambda a: True),
    )
    return ConstraintNetwork(variables, relations), Evidence({})


def _fixture_triangle(priors="uniform", epsilon: float = 0.0):
    """Three 3-valued roots pairwise constrained through hidden bits, all
    observed to 1; the posterior concentrates on the all-3 assignment."""
    return gen_coloring(
        n_x=3,
        n_h=3,
        epsilon=epsilon,
        seed=0,
        parents=((0, 1), (1, 2), (0, 2)),
        priors=priors,
    )


def _fixture_maxclosed5():
    """Five-variable network whose positive-support constraints are all
    closed under componentwise maximum."""
    variables = (
        Variable(0, "V", (1, 2, 3, 4, 5)),
        Variable(1, "W", (1, 2, 4, 5)),
        Variable(2, "X", (1, 2, 3, 4, 5)),
        Variable(3, "Y", (1, 2, 3, 4, 5)),
        Variable(4, "Z", (1, 2, 3, 4)),
    )
    cpts = (
        predicate_cpt(0, (4,), variables, lambda v, z: 3 * v <= z + 1),
        predicate_cpt(1, (3, 4), variables, lambda w, y, z: w * z >= 2 * y),
        predicate_cpt(
            2, (4, 3, 1), variables, lambda x, z, y, w: 3 * x + y + z >= 5 * w + 1
        ),
        predicate_cpt(3, (4,), variables, lambda y, z: y >= z + 2),
        Cpt(4, (), np.array([0.25, 0.25, 0.25, 0.25])),
    )
    return BayesNetwork(variables, cpts), Evidence({})


def _fixture_sixfam():
    """Six-family structure fixture (uniform tables, 3-valued variables)."""
    variables = tuple(
        Variable(i, n, (1, 2, 3)) for i, n in enumerate("ABCDFG")
    )
    u1 = np.full((3,), 1 / 3)
    u2 = np.full((3, 3), 1 / 3)
    u3 = np.full((3, 3, 3), 1 / 3)
    cpts = (
        Cpt(0, (), u1),
        Cpt(1, (0,), u2),
        Cpt(2, (0,), u2),
        Cpt(3, (1, 0), u3),
        Cpt(4, (2, 1), u3),
        Cpt(5, (4, 3), u3),
    )
    return BayesNetwork(variables, cpts), Evidence({})


_FIXTURES = {
    "ex2.2": _fixture_coloring6,
    "coloring6": _fixture_coloring6,
    "ex3.1": _fixture_chain3,
    "chain3": _fixture_chain3,
    "ex4.4": _fixture_triangle,
    "triangle": _fixture_triangle,
    "ex4.6": _fixture_maxclosed5,
    "maxclosed5": _fixture_maxclosed5,
    "fig1": _fixture_sixfam,
    "sixfam": _fixture_sixfam,
}


def fixture(name: str):
    """Named fixture network plus its evidence."""
    try:
        build = _FIXTURES[name]
    except KeyError:
        raise ValueError(
            f"unknown fixture {name!r}; choose from {sorted(_FIXTURES)}"
        ) from None
    return build()


def fixture_names() -> list[str]:
    return sorted(_FIXTURES)


# ---------------------------------------------------------------------------
# Constraint network -> directed network encoding
# ---------------------------------------------------------------------------


def constraint_to_bayes(cn: ConstraintNetwork):
    """Hidden-bit encoding of a constraint network.

    Original variables become roots with uniform priors; every relation gets
    a binary hidden child over its scope that is 1 exactly on the allowed
    tuples. Conditioning all hidden variables on 1 preserves the solution
    set.
    """
    n = len(cn.variables)
    variables = list(cn.variables)
    cpts: list[Cpt | None] = [None] * n
    for v in cn.variables:
        cpts[v.id] = Cpt(v.id, (), np.full((v.card,), 1.0 / v.card))
    evidence = {}
    for k, rel in enumerate(cn.relations):
        hid = n + k
        variables.append(Variable(hid, f"h{k}", (0, 1)))
        pcards = [cn.variables[v].card for v in rel.scope]
        vals = np.zeros(tuple(pcards) + (2,))
        for pidx in itertools.product(*(range(c) for c in pcards)):
            labs = tuple(
                cn.variables[v].domain[i] for v, i in zip(rel.scope, pidx)
            )
            on = labs in rel.tuples
            vals[pidx + (1,)] = 1.0 if on else 0.0
            vals[pidx + (0,)] = 0.0 if on else 1.0
        cpts.append(Cpt(hid, tuple(rel.scope), vals))
        evidence[hid] = 1
    return BayesNetwork(tuple(variables), tuple(cpts)), Evidence(evidence)


# ---------------------------------------------------------------------------
# Random families
# ---------------------------------------------------------------------------


def gen_coloring(
    n_x: int = 20,
    n_h: int = 40,
    epsilon: float = 0.0,
    seed: int = 0,
    parents=None,
    priors=None,
):
    """Coloring-style networks: 3-valued roots, hidden pair constraints.

    Roots get Dirichlet-flat random priors (or exact uniform with
    priors="uniform"); each hidden bit constrains two distinct random roots
    with the 0/1 pattern softened to epsilon / 1-epsilon. All hidden bits are
    observed to 1.
    """
    if n_h < 1 or not (0.0 <= epsilon < 0.5):
        raise ValueError("need n_h >= 1 and 0 <= epsilon < 0.5")
    rng = np.random.default_rng(seed)
    variables = [Variable(i, f"X{i}", (1, 2, 3)) for i in range(n_x)]
    variables += [Variable(n_x + k, f"H{k}", (0, 1)) for k in range(n_h)]
    cpts: list[Cpt] = []
    for i in range(n_x):
        if priors == "uniform":
            p = np.full((3,), 1.0 / 3.0)
        elif priors is None:
            p = rng.dirichlet((1.0, 1.0, 1.0))
        else:
            p = np.asarray(priors, dtype=float)
        cpts.append(Cpt(i, (), p))
    if parents is None:
        parents = [tuple(rng.choice(n_x, size=2, replace=False)) for _ in range(n_h)]
    evidence = {}
    for k in range(n_h):
        a, b = (int(parents[k][0]), int(parents[k][1]))
        cpts.append(_pair_constraint_cpt(n_x + k, (a, b), epsilon))
        evidence[n_x + k] = 1
    return BayesNetwork(tuple(variables), tuple(cpts)), Evidence(evidence)


def gen_coding(
    layers: int = 2,
    width: int = 10,
    parents_per_bit: int = 3,
    sigma: float = 0.2,
    seed: int = 0,
):
    """Block-code networks observed through a Gaussian channel.

    Layer 0 holds uniform information bits; each later layer holds bits that
    are a deterministic parity of parents_per_bit random bits from the layer
    below. Every bit is sent antipodally (0 -> +1, 1 -> -1) and the sampled
    channel output is folded into an observed binary child whose two columns
    carry the per-bit normalized Gaussian likelihoods.

    Returns (network, evidence, truth) with truth the transmitted bits.
    """
    if width < parents_per_bit:
        raise ValueError("width must be at least parents_per_bit")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    rng = np.random.default_rng(seed)
    n_bits = layers * width
    variables = [Variable(i, f"b{i}", (0, 1)) for i in range(n_bits)]
    cpts: list[Cpt] = []
    truth = np.zeros(n_bits, dtype=int)
    for i in range(width):
        cpts.append(Cpt(i, (), np.array([0.5, 0.5])))
        truth[i] = int(rng.integers(0, 2))
    parity = np.zeros((2,) * parents_per_bit + (2,))
    for pidx in itertools.product((0, 1), repeat=parents_per_bit):
        bit = 0
        for p in pidx:
            bit ^= p
        parity[pidx + (bit,)] = 1.0
    for layer in range(1, layers):
        for j in range(width):
            bit_id = layer * width + j
            prev = np.arange((layer - 1) * width, layer * width)
            pa = tuple(int(x) for x in rng.choice(prev, size=parents_per_bit, replace=False))
            cpts.append(Cpt(bit_id, pa, parity.copy()))
            bit = 0
            for p in pa:
                bit ^= truth[p]
            truth[bit_id] = bit
    evidence = {}
    for i in range(n_bits):
        obs_id = n_bits + i
        variables.append(Variable(obs_id, f"y{i}", (0, 1)))
        y = (1.0 if truth[i] == 0 else -1.0) + sigma * rng.standard_normal()
        logl = np.array(
            [-((y - 1.0) ** 2) / (2 * sigma**2), -((y + 1.0) ** 2) / (2 * sigma**2)]
        )
        like = np.exp(logl - logl.max())
        like = like / like.sum()
        vals = np.zeros((2, 2))
        vals[0, 1] = like[0]
        vals[0, 0] = 1.0 - like[0]
        vals[1, 1] = like[1]
        vals[1, 0] = 1.0 - like[1]
        cpts.append(Cpt(obs_id, (i,), vals))
        evidence[obs_id] = 1
    return BayesNetwork(tuple(variables), tuple(cpts)), Evidence(evidence), truth


def _random_column_cpt(rng, child, parents, cards, zero_fraction=0.0):
    shape = tuple(cards[p] for p in parents) + (cards[child],)
    vals = rng.uniform(0.0, 1.0, size=shape)
    if zero_fraction > 0.0:
        vals[rng.random(size=shape) < zero_fraction] = 0.0
    flat = vals.reshape(-1, shape[-1])
    for row in flat:
        if row.sum() == 0.0:
            row[rng.integers(0, shape[-1])] = rng.uniform(0.1, 1.0)
    vals = flat.reshape(shape)
    return Cpt(child, tuple(parents), vals / vals.sum(axis=-1, keepdims=True))


def _attach_evidence(rng, bn: BayesNetwork, n_evidence: int) -> Evidence:
    """Random values on randomly chosen childless variables (then deeper
    internal ones, should the request exceed the number of leaves)."""
    if n_evidence <= 0:
        return Evidence({})
    is_parent = set()
    for cpt in bn.cpts:
        is_parent.update(cpt.parents)
    leaves = [v for v in range(bn.n) if v not in is_parent]
    inner = [v for v in range(bn.n) if v in is_parent]
    pool = list(rng.permutation(leaves)) + list(rng.permutation(inner))
    pool = [int(v) for v in pool[:n_evidence]]
    return Evidence(
        {
            v: bn.variables[v].domain[int(rng.integers(0, bn.variables[v].card))]
            for v in pool
        }
    )


def gen_grid(rows: int = 10, cols: int = 10, seed: int = 0, n_evidence: int = 0):
    """Binary grid network with edges to the right and down neighbors."""
    rng = np.random.default_rng(seed)
    n = rows * cols
    variables = tuple(Variable(i, f"g{i}", (0, 1)) for i in range(n))
    cards = {i: 2 for i in range(n)}
    cpts = []
    for i in range(rows):
        for j in range(cols):
            vid = i * cols + j
            parents = []
            if i > 0:
                parents.append((i - 1) * cols + j)
            if j > 0:
                parents.append(i * cols + (j - 1))
            cpts.append(_random_column_cpt(rng, vid, parents, cards))
    bn = BayesNetwork(variables, tuple(cpts))
    return bn, _attach_evidence(rng, bn, n_evidence)


def gen_random(
    n: int = 80,
    max_parents: int = 3,
    seed: int = 0,
    domain_size=2,
    zero_fraction: float = 0.0,
    n_evidence: int = 0,
):
    """Random-structure network: each node draws up to max_parents earlier
    nodes. domain_size may be an int or an inclusive (lo, hi) range."""
    rng = np.random.default_rng(seed)
    if isinstance(domain_size, int):
        cards = {i: domain_size for i in range(n)}
    else:
        lo, hi = domain_size
        cards = {i: int(rng.integers(lo, hi + 1)) for i in range(n)}
    variables = tuple(
        Variable(i, f"v{i}", tuple(range(cards[i]))) for i in range(n)
    )
    cpts = []
    for i in range(n):
        k = int(rng.integers(0, min(i, max_parents) + 1))
        parents = sorted(int(x) for x in rng.choice(i, size=k, replace=False))
        cpts.append(_random_column_cpt(rng, i, parents, cards, zero_fraction))
    bn = BayesNetwork(variables, tuple(cpts))
    return bn, _attach_evidence(rng, bn, n_evidence)


def gen_polytree(
    n: int = 10,
    seed: int = 0,
    domain_size=2,
    zero_fraction: float = 0.0,
    n_evidence: int = 0,
):
    """Random polytree: a random undirected tree with random edge
    orientations, so nodes may have several parents but no undirected cycle
    exists."""
    rng = np.random.default_rng(seed)
    if isinstance(domain_size, int):
        cards = {i: domain_size for i in range(n)}
    else:
        lo, hi = domain_size
        cards = {i: int(rng.integers(lo, hi + 1)) for i in range(n)}
    variables = tuple(
        Variable(i, f"v{i}", tuple(range(cards[i]))) for i in range(n)
    )
    parents: dict[int, list[int]] = {i: [] for i in range(n)}
    for j in range(1, n):
        k = int(rng.integers(0, j))
        if rng.integers(0, 2) == 0:
            parents[j].append(k)
        else:
            parents[k].append(j)
    cpts = [
        _random_column_cpt(rng, i, sorted(parents[i]), cards, zero_fraction)
        for i in range(n)
    ]
    bn = BayesNetwork(variables, tuple(cpts))
    return bn, _attach_evidence(rng, bn, n_evidence)

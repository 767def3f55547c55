"""Verification layer: lockstep trace comparison, zero-soundness audits,
interval error metrics and the finite-precision decay demonstration.

The lockstep comparator drives the float engine and the relational engine
over the same graph, the same evidence reduction and the same send schedule
(no-echo on both sides), asserting after every message that the exactly-zero
entries of the numeric message are exactly the tuples absent from the
relational one. The relational side is a genuinely separate engine, not the
float engine's own structural shadow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dualgraph import DualJoinGraph, singleton_join_graph, sweep_schedule
from .drac import DracEngine
from .generators import gen_coloring
from .ibp import IbpEngine
from .model import (
    BayesNetwork,
    Cpt,
    SizeGuardError,
    as_evidence,
    mixed_radix_assignments,
)
from .oracle import PosteriorResult, brute_force_posteriors, variable_elimination


# ---------------------------------------------------------------------------
# Lockstep comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepRecord:
    step: int
    arc: tuple[int, int]
    ibp_zero_tuples: frozenset
    drac_removed_tuples: frozenset


@dataclass
class TraceReport:
    schedule: list
    steps: list
    mismatches: list
    sweeps: int
    verdict: str

    @property
    def match(self) -> bool:
        return self.verdict == "match"


def _zero_coords(table, variables) -> frozenset:
    cards = [variables[v].card for v in table.scope]
    out = []
    arr = table.values
    for idx in mixed_radix_assignments(cards):
        val = arr[idx]
        dead = (not bool(val)) if arr.dtype == np.bool_ else (float(val) == 0.0)
        if dead:
            out.append(tuple(variables[v].domain[i] for v, i in zip(table.scope, idx)))
    return frozenset(out)


def lockstep_compare(
    bn: BayesNetwork,
    evidence=None,
    graph: DualJoinGraph | None = None,
    schedule=None,
    max_sweeps: int | None = None,
    record_steps: bool = False,
) -> TraceReport:
    """Step-aligned zero traces of belief propagation and relational
    arc-consistency over the same graph.

    Both engines run in no-echo mode with the identical arc schedule; the
    relational side works on the strict-positivity view of the same
    functions, so the graphs are aligned node for node by construction.
    """
    e = as_evidence(evidence)
    if graph is None:
        graph = singleton_join_graph(bn)
    num = IbpEngine(graph, bn.variables, e, mode="sequential", normalize=True)
    rel = DracEngine(graph, bn.variables, e, mode="noecho")
    arcs = sweep_schedule(graph, schedule)
    if num.labels != rel.labels:
        raise ValueError("engines disagree on reduced arc labels")
    cap = max_sweeps if max_sweeps is not None else rel.bound
    steps: list[StepRecord] = []
    mismatches: list[dict] = []
    step = 0
    sweeps = 0
    for _ in range(max(cap, 1)):
        sweeps += 1
        changed = False
        for (u, v) in arcs:
            step += 1
            num.send(u, v)
            changed |= rel.send(u, v)
            m_num = num.messages[(u, v)].values
            m_rel = rel.messages[(u, v)].values
            agree = np.array_equal(m_num == 0.0, ~m_rel)
            if record_steps or not agree:
                iz = _zero_coords(num.messages[(u, v)], bn.variables)
                rz = _zero_coords(rel.messages[(u, v)], bn.variables)
                if record_steps:
                    steps.append(StepRecord(step, (u, v), iz, rz))
                if not agree:
                    mismatches.append(
                        {
                            "step": step,
                            "arc": (u, v),
                            "ibp_only": sorted(iz - rz),
                            "drac_only": sorted(rz - iz),
                        }
                    )
        for u in range(graph.n_nodes):
            b_num = num._cluster_belief(u)
            b_rel = rel.current[u]
            if not np.array_equal(b_num.values == 0.0, ~b_rel.values):
                mismatches.append(
                    {
                        "step": step,
                        "node": u,
                        "ibp_only": sorted(
                            _zero_coords(b_num, bn.variables)
                            - _zero_coords(b_rel, bn.variables)
                        ),
                        "drac_only": sorted(
                            _zero_coords(b_rel, bn.variables)
                            - _zero_coords(b_num, bn.variables)
                        ),
                    }
                )
        num.iteration += 1
        if not changed:
            break
    verdict = "match" if not mismatches else "mismatch"
    return TraceReport(arcs, steps, mismatches, sweeps, verdict)


# ---------------------------------------------------------------------------
# Soundness and completeness audit
# ---------------------------------------------------------------------------


@dataclass
class SoundnessReport:
    sound: bool
    violations: list
    variable_gap: dict
    family_gap: dict
    stable_at: int | None
    extra_iterations: int
    bound: int
    zero_stable_within_bound: bool
    impossible_evidence: bool
    iterations_run: int

    @property
    def gap_empty(self) -> bool:
        return not any(self.variable_gap.values()) and not any(
            self.family_gap.values()
        )


def _exact_oracle(bn, evidence) -> PosteriorResult:
    try:
        return brute_force_posteriors(bn, evidence)
    except SizeGuardError:
        return variable_elimination(bn, evidence)


def soundness_audit(
    bn: BayesNetwork,
    evidence=None,
    graph: DualJoinGraph | None = None,
    max_iterations: int | None = None,
    strict: bool = False,
    extra_iterations: int = 3,
) -> SoundnessReport:
    """Check every reported zero against the exact posterior and confirm the
    zero set stops changing within the tuple-count bound.

    Underflow-tagged zeros are excluded unless strict=True; they are the
    documented finite-precision failure mode, not propagation errors. The
    completeness gap lists exact zeros the propagation did not find.
    """
    e = as_evidence(evidence)
    if graph is None:
        graph = singleton_join_graph(bn)
    engine = IbpEngine(graph, bn.variables, e, mode="sequential")
    bound = DracEngine(graph, bn.variables, e, mode="noecho").bound
    cap = bound if max_iterations is None else max_iterations
    stable_at = None
    for _ in range(cap):
        entry = engine.sweep()
        if entry["shadow_stable"] and not entry["zero_changed"]:
            stable_at = engine.iteration
            break
    snapshot = {
        "fam": {k: set(v) for k, v in engine.family_zeros.items()},
        "var": {k: set(v) for k, v in engine.variable_zeros.items()},
    }
    for _ in range(extra_iterations):
        engine.sweep()
    stable = (
        stable_at is not None
        and snapshot["fam"] == {k: set(v) for k, v in engine.family_zeros.items()}
        and snapshot["var"] == {k: set(v) for k, v in engine.variable_zeros.items()}
    )

    exact = _exact_oracle(bn, e)
    violations: list[dict] = []
    for child, book in engine.family_zeros.items():
        table = exact.family_beliefs.get(child)
        if table is None:
            continue
        for labels, rec in book.items():
            if rec.provenance == "underflow" and not strict:
                continue
            idx = tuple(
                bn.variables[v].index_of(lab) for v, lab in zip(table.scope, labels)
            )
            if not exact.impossible and float(table.values[idx]) != 0.0:
                violations.append(
                    {"family": child, "assignment": labels, "record": rec}
                )
    for var, book in engine.variable_zeros.items():
        arr = exact.variable_beliefs[var]
        for lab, rec in book.items():
            if rec.provenance == "underflow" and not strict:
                continue
            if not exact.impossible and float(arr[bn.variables[var].index_of(lab)]) != 0.0:
                violations.append({"variable": var, "value": lab, "record": rec})

    variable_gap: dict[int, set] = {}
    family_gap: dict[int, set] = {}
    if not exact.impossible:
        zero_vals = exact.variable_zero_values(bn.variables)
        for var, zeros in zero_vals.items():
            if var in e:
                continue
            found = set(engine.variable_zeros.get(var, {}))
            variable_gap[var] = zeros - found
        for cpt in bn.cpts:
            if cpt.child in e:
                continue
            table = exact.family_beliefs[cpt.child]
            parent_marg = table.eliminate({cpt.child})
            child_axis = table.scope.index(cpt.child)
            cards = [bn.variables[v].card for v in table.scope]
            exact_zeros = set()
            for idx in mixed_radix_assignments(cards):
                pidx = idx[:child_axis] + idx[child_axis + 1 :]
                if (
                    float(table.values[idx]) == 0.0
                    and float(parent_marg.values[pidx]) != 0.0
                ):
                    exact_zeros.add(
                        tuple(
                            bn.variables[v].domain[i]
                            for v, i in zip(table.scope, idx)
                        )
                    )
            family_gap[cpt.child] = exact_zeros - set(
                engine.family_zeros.get(cpt.child, {})
            )
    return SoundnessReport(
        sound=not violations,
        violations=violations,
        variable_gap=variable_gap,
        family_gap=family_gap,
        stable_at=stable_at,
        extra_iterations=extra_iterations,
        bound=bound,
        zero_stable_within_bound=stable,
        impossible_evidence=exact.impossible,
        iterations_run=engine.iteration,
    )


# ---------------------------------------------------------------------------
# Interval error metrics
# ---------------------------------------------------------------------------


@dataclass
class IntervalErrorReport:
    bin_width: float
    bin_edges: np.ndarray
    exact_counts: np.ndarray
    approx_counts: np.ndarray
    recall_error: np.ndarray  # nan where a bin holds no exact beliefs
    precision_error: np.ndarray  # nan where a bin holds no approx beliefs
    total: int

    def lower_half(self) -> dict:
        """The bins covering [0, 0.5]; problems symmetric in their two values
        carry the full picture there."""
        k = int(np.ceil(0.5 / self.bin_width))
        return {
            "bin_edges": self.bin_edges[: k + 1],
            "exact_counts": self.exact_counts[:k],
            "approx_counts": self.approx_counts[:k],
            "recall_error": self.recall_error[:k],
            "precision_error": self.precision_error[:k],
        }

    def mean_absolute_error(self) -> float:
        mass = self.exact_counts.sum()
        if mass == 0:
            return 0.0
        tot = np.nansum(
            np.where(self.exact_counts > 0, self.recall_error, 0.0)
            * self.exact_counts
        )
        return float(tot / mass)


def _flatten_beliefs(beliefs: dict) -> np.ndarray:
    chunks = [np.asarray(beliefs[k], dtype=float) for k in sorted(beliefs)]
    return np.concatenate(chunks) if chunks else np.zeros(0)


def interval_error_report(exact: dict, approx: dict, bin_width: float = 0.05) -> IntervalErrorReport:
    """Absolute error binned by exact belief (recall) and by approximate
    belief (precision), with the per-bin histograms of both."""
    if sorted(exact) != sorted(approx):
        raise ValueError("exact and approx must cover the same variables")
    for k in exact:
        if len(exact[k]) != len(approx[k]):
            raise ValueError(f"value count mismatch for variable {k}")
    ex = _flatten_beliefs(exact)
    ap = _flatten_beliefs(approx)
    err = np.abs(ex - ap)
    k = int(round(1.0 / bin_width))
    edges = np.linspace(0.0, 1.0, k + 1)
    ex_bin = np.minimum((ex / bin_width).astype(int), k - 1)
    ap_bin = np.minimum((ap / bin_width).astype(int), k - 1)
    exact_counts = np.bincount(ex_bin, minlength=k)
    approx_counts = np.bincount(ap_bin, minlength=k)
    recall = np.full(k, np.nan)
    precision = np.full(k, np.nan)
    for b in range(k):
        if exact_counts[b]:
            recall[b] = err[ex_bin == b].mean()
        if approx_counts[b]:
            precision[b] = err[ap_bin == b].mean()
    return IntervalErrorReport(
        bin_width, edges, exact_counts, approx_counts, recall, precision, ex.size
    )


@dataclass
class BitErrorReport:
    rate: float
    ties: int
    n_bits: int


def bit_error_rate(truth: dict, beliefs: dict) -> BitErrorReport:
    """Fraction of bits whose most probable value differs from the truth.

    Ties in the argmax decode to the first domain value and are counted.
    """
    errors = 0
    ties = 0
    for var, bit in truth.items():
        arr = np.asarray(beliefs[var], dtype=float)
        best = int(np.argmax(arr))
        if np.count_nonzero(arr == arr[best]) > 1:
            ties += 1
            best = 0
        errors += int(best != bit)
    n = len(truth)
    return BitErrorReport(errors / n if n else 0.0, ties, n)


# ---------------------------------------------------------------------------
# Finite-precision decay demonstration
# ---------------------------------------------------------------------------


@dataclass
class DecayReport:
    priors: tuple
    trajectory: list  # (iteration, belief of the third value)
    underflow_iteration: int | None
    monotone_decreasing: bool
    final_belief: np.ndarray
    exact_belief: np.ndarray
    zero_provenance: str | None


def precision_decay_demo(
    priors=(0.45, 0.45, 0.10), max_iterations: int = 100_000
) -> DecayReport:
    """Three pairwise-constrained 3-valued roots, all hidden bits observed.

    With more prior mass on the first two values than the third, the belief
    in the third value decays geometrically: mathematically it never reaches
    zero and the messages never stabilize, but in double precision it
    underflows to an exact 0.0 at a finite iteration, leaving the final
    belief split evenly over the first two values while the true posterior
    is concentrated on the third.
    """
    bn, e = gen_coloring(
        n_x=3, n_h=3, epsilon=0.0, seed=0, parents=((0, 1), (1, 2), (0, 2)),
        priors=tuple(priors),
    )
    graph = singleton_join_graph(bn)
    engine = IbpEngine(graph, bn.variables, e, mode="sequential")
    trajectory: list[tuple[int, float]] = []
    underflow_at = None
    monotone = True
    prev = None
    for _ in range(max_iterations):
        engine.sweep()
        bel = engine.variable_belief(0).values
        b3 = float(bel[2])
        trajectory.append((engine.iteration, b3))
        if prev is not None and b3 >= prev and b3 != 0.0:
            monotone = False
        if b3 == 0.0:
            underflow_at = engine.iteration
            break
        prev = b3
    exact = brute_force_posteriors(bn, e).variable_beliefs[0]
    prov = None
    rec = engine.variable_zeros.get(0, {}).get(bn.variables[0].domain[2])
    if rec is not None:
        prov = rec.provenance
    return DecayReport(
        priors=tuple(priors),
        trajectory=trajectory,
        underflow_iteration=underflow_at,
        monotone_decreasing=monotone,
        final_belief=engine.variable_belief(0).values,
        exact_belief=exact,
        zero_provenance=prov,
    )

"""Counterfactual outcome classification.

An outcome sequence ``m`` is counterfactual of type ``r`` when, under ``U_r``,
every history containing ``m`` other than the all-off one has zero amplitude,
and under every other variant ``m`` has probability zero.  Observing it
identifies ``r`` although the computer was never switched on.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundViolation, UnsupportedComputer
from .history import PRUNE_TOL, LEAF_CAP, OutcomeRecord, all_off_string, expand, outcome_records, records_from_tree
from .protocol import InsertionStep, MeasurementStep, Protocol
from .tensor import ZERO_TOL

APPROX_FLOOR_FACTOR = 10.0


@dataclass(frozen=True, eq=False)
class CFOutcome:
    m: tuple
    variant: int
    probability: float
    witness: str
    witness_vector: np.ndarray
    leak: float


@dataclass(frozen=True, eq=False)
class CFReport:
    outcomes: tuple
    p: tuple
    variant_names: tuple
    zero_tol: float
    n_insertions: int
    common_off: bool
    records: tuple = field(default=(), repr=False)

    @property
    def p_sum(self) -> float:
        return float(sum(self.p))

    def types(self) -> set[int]:
        return {o.variant for o in self.outcomes}

    def of_type(self, r: int) -> list[CFOutcome]:
        return [o for o in self.outcomes if o.variant == r]


@dataclass(frozen=True, eq=False)
class ApproxCFOutcome:
    m: tuple
    variant: int
    epsilon: float
    leak_same: float
    leak_other: float
    all_off_probability: float


def variant_records(p: Protocol, engine: str = "compact", labels: str = "offon",
                    threads: int = 1, prune_tol: float = PRUNE_TOL, leaf_cap: int = LEAF_CAP) -> list[dict]:
    """Per-variant ``OutcomeRecord`` maps, in variant order."""
    if engine == "compact":
        if labels != "offon":
            raise ValueError("the compact engine tracks off/on histories; use engine='tree' for signature labels")

        def job(r):
            return outcome_records(p, r, prune_tol)
    elif engine == "tree":
        def job(r):
            return records_from_tree(expand(p, r, labels=labels, prune_tol=prune_tol, leaf_cap=leaf_cap))
    else:
        raise ValueError(f"unknown engine {engine!r}")
    variants = range(len(p.computer.variants))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(job, variants))
    return [job(r) for r in variants]


def _prob(recs: dict, m) -> float:
    rec = recs.get(m)
    return rec.probability if rec is not None else 0.0


def classify(p: Protocol, zero_tol: float = ZERO_TOL, engine: str = "compact", labels: str = "offon",
             threads: int = 1, prune_tol: float = PRUNE_TOL, leaf_cap: int = LEAF_CAP) -> CFReport:
    """Find every counterfactual outcome of ``p`` and the per-type totals ``p_r``.

    Condition 1 is tested on the summed weight of the non-all-off histories
    containing ``m``; condition 2 on the probability of ``m`` under each other
    variant; both against ``zero_tol``.  Outcomes whose own probability is
    below ``zero_tol`` are not reported.
    """
    comp = p.computer
    if labels == "signature" and len(comp.variants) != 2:
        raise UnsupportedComputer("signature labels need a two-variant computer")
    recs = variant_records(p, engine, labels, threads, prune_tol, leaf_cap)
    label = "f"
    all_m = sorted(set().union(*[r.keys() for r in recs]))
    outcomes = []
    for m in all_m:
        for r, rr in enumerate(recs):
            rec = rr.get(m)
            if rec is None or rec.probability < zero_tol or rec.leak >= zero_tol:
                continue
            if any(_prob(recs[s], m) >= zero_tol for s in range(len(recs)) if s != r):
                continue
            outcomes.append(CFOutcome(m, r, rec.all_off_probability, all_off_string(p, m, label),
                                      rec.all_off, rec.leak))
    p_r = [0.0] * len(comp.variants)
    for o in outcomes:
        p_r[o.variant] += o.probability
    report = CFReport(tuple(outcomes), tuple(p_r), comp.names, zero_tol, p.n_insertions, comp.common_off,
                      tuple(recs))
    if comp.common_off and len(comp.variants) == 2 and report.p_sum > 1 + 1e-9:
        raise BoundViolation(f"p_0 + p_1 = {report.p_sum!r} exceeds 1 on a common-off protocol")
    return report


def classify_approx(p: Protocol, epsilon: float, floor_factor: float = APPROX_FLOOR_FACTOR,
                    engine: str = "compact", threads: int = 1, prune_tol: float = PRUNE_TOL) -> list[ApproxCFOutcome]:
    """Outcome sequences that are approximately counterfactual at level ``epsilon``.

    ``m`` qualifies for ``r`` when the non-all-off weight under ``U_r`` and the
    probability under every other variant are both below ``epsilon``, and the
    all-off probability is at least ``floor_factor * epsilon`` (``0`` disables
    the floor).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    recs = variant_records(p, engine, "offon", threads, prune_tol)
    found = []
    for m in sorted(set().union(*[r.keys() for r in recs])):
        for r, rr in enumerate(recs):
            rec: OutcomeRecord | None = rr.get(m)
            if rec is None:
                continue
            other = max((_prob(recs[s], m) for s in range(len(recs)) if s != r), default=0.0)
            if rec.leak < epsilon and other < epsilon and rec.all_off_probability >= floor_factor * epsilon \
                    and rec.all_off_probability > 0:
                found.append(ApproxCFOutcome(m, r, epsilon, rec.leak, other, rec.all_off_probability))
    return found


def ifm_check(p: Protocol) -> bool:
    """True iff every insertion is immediately followed by a computational-basis
    measurement that reads the output register and halts exactly on the
    outcomes where it reads ``1``."""
    for k, step in enumerate(p.steps):
        if not isinstance(step, InsertionStep):
            continue
        if k + 1 >= len(p.steps):
            return False
        nxt = p.steps[k + 1]
        if not isinstance(nxt, MeasurementStep) or step.output not in nxt.targets:
            return False
        pos = nxt.targets.index(step.output)
        dims = [p.layout.dims[t] for t in nxt.targets]
        stride = int(np.prod(dims[pos + 1:]))
        expected_halt = set()
        for o in nxt.outcomes:
            q = o.basis
            if q.shape[1] != 1:
                return False
            nz = np.flatnonzero(np.abs(q[:, 0]) > 1e-12)
            if len(nz) != 1:
                return False
            if (int(nz[0]) // stride) % dims[pos] == 1:
                expected_halt.add(o.label)
        if set(nxt.halt_on) != expected_halt:
            return False
    return True

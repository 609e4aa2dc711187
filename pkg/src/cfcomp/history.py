"""History trees and outcome-sequence probabilities.

Two engines live here.

``expand`` materializes the full branching structure under one ``U_r``: an
insertion splits the state into its switch-subspace components (off/on, or
the a/b/f/n classes of a two-variant computer) and every measurement splits
it into its outcome components.  Leaves carry un-normalized terminal vectors.

``outcome_records`` branches on measurement outcomes only.  Per outcome
sequence it tracks the coherent sum of all history vectors, the coherent sum
of the all-off histories, and a factor ``F`` with ``F F^dagger`` equal to the
Gram sum ``sum v_h v_h^dagger`` over the remaining histories.  That carries
exactly what classification needs at a cost independent of the number of
histories.  Tests check it against ``expand``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import LeafCapExceeded
from .protocol import InsertionStep, MeasurementStep, Protocol, UnitaryStep, build_u, signature
from .tensor import StateVector, apply_columns, project_columns

PRUNE_TOL = 1e-18
LEAF_CAP = 2 ** 22

OutcomeSequence = tuple  # tuple[str, ...]: one label per executed measurement step


@dataclass(frozen=True)
class InsertionBranch:
    step: int
    label: str
    kind = "insertion"


@dataclass(frozen=True)
class MeasurementOutcome:
    step: int
    label: str
    kind = "measurement"


@dataclass(frozen=True, eq=False)
class History:
    labels: tuple
    terminal: StateVector
    halted: bool = False

    @property
    def label_string(self) -> str:
        return "".join(lab.label for lab in self.labels)

    @property
    def outcomes(self) -> OutcomeSequence:
        return tuple(lab.label for lab in self.labels if isinstance(lab, MeasurementOutcome))

    @property
    def insertion_labels(self) -> tuple[str, ...]:
        return tuple(lab.label for lab in self.labels if isinstance(lab, InsertionBranch))

    @property
    def weight(self) -> float:
        return self.terminal.norm2

    @property
    def sort_key(self):
        return tuple(lab.label for lab in self.labels)


@dataclass(frozen=True, eq=False)
class HistoryTree:
    protocol: Protocol
    variant: int
    leaves: tuple
    label_mode: str = "offon"

    def off_labels(self, r: int | None = None) -> frozenset:
        """Insertion labels lying in the off-subspace of variant ``r``."""
        r = self.variant if r is None else r
        if self.label_mode == "signature":
            return frozenset({"f", "a"} if r == 0 else {"f", "b"})
        return frozenset({"f"})

    def is_all_off(self, h: History, r: int | None = None) -> bool:
        off = self.off_labels(r)
        return all(lab in off for lab in h.insertion_labels)

    def containing(self, m: Sequence[str]) -> list[History]:
        m = tuple(m)
        return [h for h in self.leaves if h.outcomes == m]

    def nonzero_leaves(self, tol: float = PRUNE_TOL) -> list[History]:
        return [h for h in self.leaves if h.weight >= tol]

    def outcome_sequences(self) -> list[OutcomeSequence]:
        return sorted({h.outcomes for h in self.leaves})


def _insertion_classes(p: Protocol, r: int, labels: str) -> list[tuple[str, np.ndarray]]:
    comp = p.computer
    eye = np.eye(comp.switch_dim, dtype=np.complex128)
    if labels == "offon":
        classes = [("f", comp.off(r)), ("n", comp.on(r))]
    elif labels == "signature":
        classes = signature(comp).classes()
    else:
        raise ValueError(f"unknown label mode {labels!r}")
    return [(lab, np.ascontiguousarray(eye[:, list(idx)])) for lab, idx in classes if idx]


def expand(p: Protocol, r: int, labels: str = "offon", prune_tol: float = PRUNE_TOL,
           leaf_cap: int = LEAF_CAP) -> HistoryTree:
    """Full history tree of protocol ``p`` under variant ``r``.

    ``labels`` selects the insertion branching: ``"offon"`` splits on the
    off/on subspaces of ``U_r`` (labels ``f``/``n``); ``"signature"`` splits on
    the a/b/f/n classes of a two-variant computer.  Branches with norm squared
    below ``prune_tol`` become zero leaves and are not expanded.
    """
    p.computer._variant(r)
    layout = p.layout
    u = build_u(p.computer, r)
    classes = _insertion_classes(p, r, labels)
    leaves: list[History] = []
    zero = np.zeros(layout.total, dtype=np.complex128)

    def record(path, vec, halted):
        if len(leaves) >= leaf_cap:
            raise LeafCapExceeded(leaf_cap)
        leaves.append(History(tuple(path), StateVector(layout, vec), halted))

    # explicit stack: (step index, path, vector as a (D, 1) column)
    stack = [(0, [], p.initial_state().amps.reshape(-1, 1).copy())]
    while stack:
        k, path, vec = stack.pop()
        while k < len(p.steps):
            step = p.steps[k]
            if isinstance(step, UnitaryStep):
                vec = apply_columns(step.matrix, step.targets, layout, vec)
                k += 1
                continue
            children = []
            if isinstance(step, MeasurementStep):
                for o in step.outcomes:
                    child = project_columns(o.basis, step.targets, layout, vec, o._qh)
                    children.append((MeasurementOutcome(k, o.label), child, o.label in step.halt_on))
            else:
                for lab, q in classes:
                    child = project_columns(q, (step.switch,), layout, vec)
                    child = apply_columns(u, step.targets, layout, child)
                    children.append((InsertionBranch(k, lab), child, False))
            live = []
            for lab, child, halts in children:
                w = float(np.vdot(child, child).real)
                if w < prune_tol:
                    record(path + [lab], zero, False)
                elif halts or k + 1 == len(p.steps):
                    record(path + [lab], child[:, 0], halts)
                else:
                    live.append((k + 1, path + [lab], child))
            # reversed so that the first child is expanded first
            stack.extend(reversed(live))
            break
        else:
            record(path, vec[:, 0], False)
    leaves.sort(key=lambda h: h.sort_key)
    return HistoryTree(p, r, tuple(leaves), labels)


def _check_m(p: Protocol, m: Sequence[str]):
    idx = p.measurement_steps
    if len(m) > len(idx):
        raise ValueError(f"outcome sequence has {len(m)} labels but the protocol has {len(idx)} measurements")
    for lab, k in zip(m, idx):
        if lab not in p.steps[k].labels:
            raise ValueError(f"unknown outcome label {lab!r} for measurement step {k}")


def coherent_sum(tree: HistoryTree, m: Sequence[str]) -> np.ndarray:
    """Sum of the terminal vectors of every history containing ``m``, in leaf order."""
    _check_m(tree.protocol, m)
    total = np.zeros(tree.protocol.layout.total, dtype=np.complex128)
    for h in tree.containing(m):
        total = total + h.terminal.amps
    return total


def outcome_probability(tree: HistoryTree, m: Sequence[str]) -> float:
    v = coherent_sum(tree, m)
    return float(np.vdot(v, v).real)


def normalization_check(tree: HistoryTree) -> float:
    """Incoherent sum of ``|v_h|^2`` over all leaves."""
    return float(sum(h.weight for h in tree.leaves))


# --- compact engine ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OutcomeRecord:
    """What one outcome sequence contributes under one variant.

    ``amplitude``: coherent sum over every history containing ``m``.
    ``all_off``: coherent sum over the all-off histories containing ``m``.
    ``leak``: ``sum |v_h|^2`` over the other histories containing ``m``.
    """

    m: OutcomeSequence
    amplitude: np.ndarray
    all_off: np.ndarray
    leak: float
    halted: bool

    @property
    def probability(self) -> float:
        return float(np.vdot(self.amplitude, self.amplitude).real)

    @property
    def all_off_probability(self) -> float:
        return float(np.vdot(self.all_off, self.all_off).real)

    @property
    def weight(self) -> float:
        """Incoherent total ``sum |v_h|^2`` over histories containing ``m``."""
        return self.all_off_probability + self.leak


def _compress(f: np.ndarray, dim: int) -> np.ndarray:
    norms = np.einsum("ij,ij->j", f.conj(), f).real
    f = f[:, norms > 1e-30]
    if f.shape[1] <= dim:
        return f
    lam, vecs = np.linalg.eigh(f @ f.conj().T)
    keep = lam > max(lam.max(), 0.0) * 1e-16
    return np.ascontiguousarray(vecs[:, keep] * np.sqrt(lam[keep]))


def outcome_records(p: Protocol, r: int, prune_tol: float = PRUNE_TOL) -> dict:
    """Map each reachable outcome sequence to its ``OutcomeRecord`` under ``U_r``.

    Columns of the working matrix are ``[coherent, all_off, F...]``.  Sequences
    whose incoherent weight falls below ``prune_tol`` are dropped.
    """
    p.computer._variant(r)
    layout = p.layout
    dim = layout.total
    u = build_u(p.computer, r)
    off_q = np.ascontiguousarray(np.eye(p.computer.switch_dim, dtype=np.complex128)[:, list(p.computer.off(r))])
    out: dict = {}

    def weight(mat):
        return float(np.einsum("ij,ij->", mat[:, 1:].conj(), mat[:, 1:]).real)

    def finish(m, mat, halted):
        f = mat[:, 2:]
        leak = float(np.einsum("ij,ij->", f.conj(), f).real)
        out[m] = OutcomeRecord(m, mat[:, 0].copy(), mat[:, 1].copy(), leak, halted)

    init = np.zeros((dim, 2), dtype=np.complex128)
    init[0, :] = 1.0
    stack = [(0, (), init)]
    while stack:
        k, m, mat = stack.pop()
        while k < len(p.steps):
            step = p.steps[k]
            if isinstance(step, UnitaryStep):
                mat = apply_columns(step.matrix, step.targets, layout, mat)
                k += 1
            elif isinstance(step, InsertionStep):
                if off_q.shape[1]:
                    m_off = project_columns(off_q, (step.switch,), layout, mat)
                else:
                    m_off = np.zeros_like(mat)
                m_on = apply_columns(u, step.targets, layout, mat - m_off)
                # U_r is the identity on the off-subspace
                coherent = m_off[:, :1] + m_on[:, :1]
                f = np.concatenate([m_off[:, 2:], m_on[:, 2:], m_on[:, 1:2]], axis=1)
                mat = np.concatenate([coherent, m_off[:, 1:2], _compress(f, dim)], axis=1)
                k += 1
            else:
                live = []
                for o in step.outcomes:
                    child = project_columns(o.basis, step.targets, layout, mat, o._qh)
                    if weight(child) < prune_tol:
                        continue
                    cm = m + (o.label,)
                    if o.label in step.halt_on or k + 1 == len(p.steps):
                        finish(cm, child, o.label in step.halt_on)
                    else:
                        live.append((k + 1, cm, child))
                stack.extend(reversed(live))
                break
        else:
            if weight(mat) >= prune_tol:
                finish(m, mat, False)
    return dict(sorted(out.items()))


def outcome_distribution(p: Protocol, r: int, prune_tol: float = PRUNE_TOL) -> dict:
    """Probability of every reachable outcome sequence under ``U_r``."""
    return {m: rec.probability for m, rec in outcome_records(p, r, prune_tol).items()}


def records_from_tree(tree: HistoryTree) -> dict:
    """``OutcomeRecord`` map built by summing the leaves of a materialized tree."""
    p = tree.protocol
    dim = p.layout.total
    groups: dict = {}
    for h in tree.leaves:
        groups.setdefault(h.outcomes, []).append(h)
    out = {}
    for m, hs in groups.items():
        amp = np.zeros(dim, dtype=np.complex128)
        off = np.zeros(dim, dtype=np.complex128)
        leak = 0.0
        for h in hs:
            amp = amp + h.terminal.amps
            if tree.is_all_off(h):
                off = off + h.terminal.amps
            else:
                leak += h.weight
        w = float(np.vdot(off, off).real) + leak
        if w < PRUNE_TOL:
            continue
        out[m] = OutcomeRecord(m, amp, off, leak, any(h.halted for h in hs))
    return dict(sorted(out.items()))


def all_off_string(p: Protocol, m: Sequence[str], label: str = "f") -> str:
    """Label string of the all-``label`` history that contains ``m``."""
    parts = []
    it = iter(m)
    for step in p.steps:
        if isinstance(step, InsertionStep):
            parts.append(label)
        elif isinstance(step, MeasurementStep):
            try:
                parts.append(next(it))
            except StopIteration:
                break
            if parts[-1] in step.halt_on:
                break
    return "".join(parts)

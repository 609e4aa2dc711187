"""Protocols, the computer family ``{U_r}`` and measurement deferral.

A protocol acts on a row of subsystems initialised to ``|0...0>`` and is a
sequence of three step kinds: a unitary on chosen subsystems, a projective
measurement with labeled outcome subspaces, or an insertion of the computer,
which applies the unknown ``U_r`` to a (switch, output) pair of subsystems.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import DimensionError, UnsupportedComputer, ValidationError
from .tensor import ZERO_TOL, SpaceLayout, StateVector, as_matrix, has_orthonormal_columns, is_unitary

DEFER_SEPARATOR = "|"


# --- the computer -----------------------------------------------------------

@dataclass(frozen=True)
class Variant:
    """One candidate ``U_r``: identity on the ``off`` switch indices, and
    ``output -> output + shift (mod output_dim)`` on the rest."""

    off: frozenset
    shift: int
    name: str


@dataclass(frozen=True)
class ComputerModel:
    switch_dim: int
    output_dim: int
    variants: tuple

    def __post_init__(self):
        if self.switch_dim < 2 or self.output_dim < 2:
            raise ValidationError("switch and output dimensions must be >= 2")
        if not self.variants:
            raise ValidationError("computer needs at least one variant")
        variants = tuple(Variant(frozenset(int(i) for i in v.off), int(v.shift), str(v.name)) for v in self.variants)
        for v in variants:
            if not v.off <= set(range(self.switch_dim)):
                raise ValidationError(f"variant {v.name}: off indices {sorted(v.off)} outside switch range")
            if not 0 <= v.shift < self.output_dim:
                raise ValidationError(f"variant {v.name}: shift {v.shift} outside output range")
        if len({v.name for v in variants}) != len(variants):
            raise ValidationError("variant names must be unique")
        object.__setattr__(self, "variants", variants)

    def __len__(self):
        return len(self.variants)

    def off(self, r: int) -> tuple[int, ...]:
        return tuple(sorted(self._variant(r).off))

    def on(self, r: int) -> tuple[int, ...]:
        off = self._variant(r).off
        return tuple(i for i in range(self.switch_dim) if i not in off)

    def _variant(self, r: int) -> Variant:
        if not 0 <= r < len(self.variants):
            raise ValueError(f"variant index {r} out of range for {len(self.variants)} variants")
        return self.variants[r]

    @property
    def common_off(self) -> bool:
        """True when every variant has the same off-subspace."""
        return len({v.off for v in self.variants}) == 1

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variants)


def standard_computer() -> ComputerModel:
    """Switch and output qubits; ``U_0`` identity, ``U_1`` C-NOT switch->output."""
    return ComputerModel(2, 2, (Variant(frozenset({0}), 0, "0"), Variant(frozenset({0}), 1, "1")))


def karm_computer(K: int) -> ComputerModel:
    """K-arm interferometer family ``U_1 .. U_{K-1}``; arms 0 and r are open for ``U_r``."""
    if K < 3:
        raise ValidationError("K-arm computer needs K >= 3")
    return ComputerModel(K, 2, tuple(Variant(frozenset({0, r}), 1, str(r)) for r in range(1, K)))


def simplex_computer(K: int) -> ComputerModel:
    """Qubit switch, (K+1)-valued output; ``U_r`` adds ``r`` to the output when on."""
    if K < 2:
        raise ValidationError("simplex computer needs K >= 2")
    return ComputerModel(2, K + 1, tuple(Variant(frozenset({0}), r, str(r)) for r in range(K + 1)))


def build_u(computer: ComputerModel, r: int) -> np.ndarray:
    """Matrix of ``U_r`` on switch (x) output, switch most significant."""
    v = computer._variant(r)
    dim_o = computer.output_dim
    u = np.zeros((computer.switch_dim * dim_o,) * 2, dtype=np.complex128)
    for i in range(computer.switch_dim):
        for j in range(dim_o):
            k = j if i in v.off else (j + v.shift) % dim_o
            u[i * dim_o + k, i * dim_o + j] = 1.0
    return u


@dataclass(frozen=True)
class SubspaceSignature:
    """a/b/f/n class of every switch basis index for a two-variant computer."""

    labels: tuple[str, ...]

    def indices(self, label: str) -> tuple[int, ...]:
        return tuple(i for i, lab in enumerate(self.labels) if lab == label)

    def classes(self) -> list[tuple[str, tuple[int, ...]]]:
        return [(lab, self.indices(lab)) for lab in "abfn" if self.indices(lab)]


def signature(computer: ComputerModel) -> SubspaceSignature:
    if len(computer.variants) != 2:
        raise UnsupportedComputer(
            f"a/b/f/n signature is defined for two variants, this computer has {len(computer.variants)}")
    off0, off1 = computer.variants[0].off, computer.variants[1].off
    table = {(True, False): "a", (False, True): "b", (True, True): "f", (False, False): "n"}
    return SubspaceSignature(tuple(table[(i in off0, i in off1)] for i in range(computer.switch_dim)))


# --- protocol steps ---------------------------------------------------------

def _targets(targets: Iterable[int]) -> tuple[int, ...]:
    return tuple(int(t) for t in targets)


@dataclass(frozen=True, eq=False)
class UnitaryStep:
    targets: tuple
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "targets", _targets(self.targets))
        m = as_matrix(self.matrix)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    kind = "unitary"


@dataclass(frozen=True, eq=False)
class Outcome:
    """Labeled outcome subspace spanned by the orthonormal columns of ``basis``."""

    label: str
    basis: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.basis, dtype=np.complex128)
        if q.ndim == 1:
            q = q.reshape(-1, 1)
        q = np.ascontiguousarray(q)
        q.setflags(write=False)
        qh = np.ascontiguousarray(q.conj().T)
        qh.setflags(write=False)
        object.__setattr__(self, "label", str(self.label))
        object.__setattr__(self, "basis", q)
        object.__setattr__(self, "_qh", qh)

    @property
    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T


@dataclass(frozen=True, eq=False)
class MeasurementStep:
    targets: tuple
    outcomes: tuple
    halt_on: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "targets", _targets(self.targets))
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        object.__setattr__(self, "halt_on", frozenset(str(h) for h in self.halt_on))
        labels = [o.label for o in self.outcomes]
        if len(set(labels)) != len(labels):
            raise ValidationError(f"duplicate outcome labels {labels}")
        for lab in labels:
            if not lab or any(ch in lab for ch in ",\n"):
                raise ValidationError(f"outcome label {lab!r} is empty or contains a reserved character")
        unknown = self.halt_on - set(labels)
        if unknown:
            raise ValidationError(f"halt_on names unknown outcomes {sorted(unknown)}")

    kind = "measurement"

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(o.label for o in self.outcomes)

    def outcome(self, label: str) -> Outcome:
        for o in self.outcomes:
            if o.label == label:
                return o
        raise KeyError(label)

    @classmethod
    def computational(cls, targets: Sequence[int], dims: Sequence[int], halt_on: Iterable[str] = ()) -> "MeasurementStep":
        """Computational-basis measurement; labels are digit strings like ``'01'``."""
        total = int(np.prod(dims))
        eye = np.eye(total, dtype=np.complex128)
        outcomes = []
        for k, digits in enumerate(itertools.product(*[range(d) for d in dims])):
            outcomes.append(Outcome("".join(_digit(x) for x in digits), eye[:, k]))
        return cls(targets, tuple(outcomes), frozenset(halt_on))

    @classmethod
    def in_basis(cls, targets: Sequence[int], vectors: Sequence, labels: Sequence[str],
                 halt_on: Iterable[str] = ()) -> "MeasurementStep":
        """Rank-one outcomes, one per basis vector."""
        if len(vectors) != len(labels):
            raise ValidationError("one label per basis vector required")
        return cls(targets, tuple(Outcome(lab, np.asarray(v)) for lab, v in zip(labels, vectors)), frozenset(halt_on))


def _digit(x: int) -> str:
    if x < 10:
        return str(x)
    if x < 36:
        return chr(ord("a") + x - 10)
    raise ValidationError("computational labels support subsystem dimensions up to 36")


@dataclass(frozen=True)
class InsertionStep:
    switch: int
    output: int

    kind = "insertion"

    @property
    def targets(self) -> tuple[int, int]:
        return (self.switch, self.output)


Step = Union[UnitaryStep, MeasurementStep, InsertionStep]


@dataclass(frozen=True, eq=False)
class Protocol:
    layout: SpaceLayout
    computer: ComputerModel
    steps: tuple
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.layout, SpaceLayout):
            object.__setattr__(self, "layout", SpaceLayout(tuple(self.layout)))
        object.__setattr__(self, "steps", tuple(self.steps))
        self.validate()

    def validate(self, tol: float = ZERO_TOL):
        n = len(self.layout)
        for k, step in enumerate(self.steps):
            where = f"step {k} ({step.kind})"
            t = step.targets
            if len(set(t)) != len(t):
                raise ValidationError(f"{where}: repeated target in {t}")
            if any(x < 0 or x >= n for x in t):
                raise ValidationError(f"{where}: target out of range in {t}")
            dim = self.layout.target_dim(t)
            if isinstance(step, UnitaryStep):
                if step.matrix.shape[0] != dim:
                    raise ValidationError(f"{where}: matrix is {step.matrix.shape[0]}x{step.matrix.shape[0]}, targets need {dim}")
                if not is_unitary(step.matrix, tol):
                    raise ValidationError(f"{where}: matrix is not unitary")
            elif isinstance(step, MeasurementStep):
                if not step.outcomes:
                    raise ValidationError(f"{where}: no outcomes")
                q = np.concatenate([o.basis for o in step.outcomes], axis=1)
                if q.shape[0] != dim:
                    raise ValidationError(f"{where}: outcome vectors have dimension {q.shape[0]}, targets need {dim}")
                if q.shape[1] != dim or not has_orthonormal_columns(q, tol):
                    raise ValidationError(f"{where}: outcome subspaces are not orthonormal or do not resolve the identity")
            elif isinstance(step, InsertionStep):
                if self.layout.dims[step.switch] != self.computer.switch_dim:
                    raise ValidationError(f"{where}: switch subsystem has dim {self.layout.dims[step.switch]}, computer needs {self.computer.switch_dim}")
                if self.layout.dims[step.output] != self.computer.output_dim:
                    raise ValidationError(f"{where}: output subsystem has dim {self.layout.dims[step.output]}, computer needs {self.computer.output_dim}")
            else:
                raise ValidationError(f"step {k}: unknown step type {type(step).__name__}")

    @property
    def n_insertions(self) -> int:
        return sum(isinstance(s, InsertionStep) for s in self.steps)

    @property
    def measurement_steps(self) -> tuple[int, ...]:
        return tuple(k for k, s in enumerate(self.steps) if isinstance(s, MeasurementStep))

    def initial_state(self) -> StateVector:
        return StateVector.basis(self.layout)

    def with_steps(self, m: Sequence[str]) -> tuple[tuple[int, str], ...]:
        """Pair each label of an outcome sequence with its measurement step index."""
        idx = self.measurement_steps
        if len(m) > len(idx):
            raise ValueError(f"outcome sequence has {len(m)} labels, protocol has {len(idx)} measurements")
        return tuple(zip(idx, m))


# --- measurement deferral ---------------------------------------------------

def _shift(dim: int, j: int) -> np.ndarray:
    return np.roll(np.eye(dim, dtype=np.complex128), j, axis=0)


def defer_measurements(p: Protocol) -> Protocol:
    """Replace every measurement by an entangling unitary with a fresh pointer.

    Each measurement with outcomes ``P_0..P_{k-1}`` becomes ``sum_j P_j (x) X^j``
    on its targets and a new pointer of dimension ``max(k, 2)`` appended to the
    layout.  Halting is reproduced by controlling later entanglers on every
    earlier halting pointer reading a non-halting value, so pointers of a halted
    branch stay at ``|0>``.  A single final measurement of all pointers has one
    outcome per original outcome sequence, labeled by joining the sequence with
    ``DEFER_SEPARATOR`` (see ``decode_deferred``).
    """
    meas = [k for k, s in enumerate(p.steps) if isinstance(s, MeasurementStep)]
    if not meas:
        return p
    for k in meas:
        if any(DEFER_SEPARATOR in lab for lab in p.steps[k].labels):
            raise ValidationError(f"step {k}: outcome labels may not contain {DEFER_SEPARATOR!r} when deferring")
    dims = list(p.layout.dims)
    pointer_of: dict[int, int] = {}
    for k in meas:
        pointer_of[k] = len(dims)
        dims.append(max(len(p.steps[k].outcomes), 2))
    layout = SpaceLayout(tuple(dims))

    steps: list = []
    halting: list[tuple[int, MeasurementStep]] = []
    for k, step in enumerate(p.steps):
        if not isinstance(step, MeasurementStep):
            steps.append(step)
            continue
        ptr = pointer_of[k]
        d_t = p.layout.target_dim(step.targets)
        d_p = dims[ptr]
        v = np.zeros((d_t * d_p,) * 2, dtype=np.complex128)
        for j, o in enumerate(step.outcomes):
            v += np.kron(o.projector, _shift(d_p, j))
        controls = [(pointer_of[kk], s) for kk, s in halting]
        if controls:
            cdims = [dims[c] for c, _ in controls]
            blocks = []
            for cfg in itertools.product(*[range(d) for d in cdims]):
                halted = any(s.labels[val] in s.halt_on for (val, (_, s)) in zip(cfg, controls) if val < len(s.labels))
                blocks.append(np.eye(d_t * d_p) if halted else v)
            ctrl = np.zeros((len(blocks) * d_t * d_p,) * 2, dtype=np.complex128)
            size = d_t * d_p
            for b, blk in enumerate(blocks):
                ctrl[b * size:(b + 1) * size, b * size:(b + 1) * size] = blk
            steps.append(UnitaryStep(tuple(c for c, _ in controls) + step.targets + (ptr,), ctrl))
        else:
            steps.append(UnitaryStep(step.targets + (ptr,), v))
        if step.halt_on:
            halting.append((k, step))

    pointers = [pointer_of[k] for k in meas]
    pdims = [dims[x] for x in pointers]
    groups: dict[str, list[int]] = {}
    for flat, cfg in enumerate(itertools.product(*[range(d) for d in pdims])):
        labels = []
        for val, k in zip(cfg, meas):
            s = p.steps[k]
            if val >= len(s.outcomes):
                labels = None
                break
            labels.append(s.labels[val])
            if labels[-1] in s.halt_on:
                break
        key = DEFER_SEPARATOR.join(labels) if labels is not None else "~unused"
        groups.setdefault(key, []).append(flat)
    total = int(np.prod(pdims))
    eye = np.eye(total, dtype=np.complex128)
    outcomes = tuple(Outcome(key, eye[:, cols]) for key, cols in groups.items())
    final = MeasurementStep(tuple(pointers), outcomes)
    steps.append(final)
    meta = dict(p.meta)
    meta["deferred_from"] = p.name
    return Protocol(layout, p.computer, tuple(steps), name=f"{p.name}+deferred" if p.name else "deferred", meta=meta)


def decode_deferred(label: str) -> tuple[str, ...]:
    """Original outcome sequence encoded in a deferred final-measurement label."""
    return tuple(label.split(DEFER_SEPARATOR))

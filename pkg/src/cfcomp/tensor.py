"""Dense complex state vectors over labeled tensor-product spaces.

Basis order puts the leftmost subsystem in the most significant position, so
the flat index of ``|i j k>`` on dims ``(d0, d1, d2)`` is ``(i*d1 + j)*d2 + k``.
All functions are pure; ``StateVector`` amplitudes are read-only arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import kernels
from .errors import DimensionError, ValidationError

ZERO_TOL = 1e-9
ALGEBRA_TOL = 1e-12


@dataclass(frozen=True)
class SpaceLayout:
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise DimensionError("layout needs at least one subsystem")
        if any(d < 2 for d in dims):
            raise DimensionError(f"every subsystem dimension must be >= 2, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def total(self) -> int:
        return int(np.prod(self.dims))

    def __len__(self):
        return len(self.dims)

    def target_dim(self, targets: Sequence[int]) -> int:
        return int(np.prod([self.dims[t] for t in targets]))

    def index_maps(self, targets: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(base, offsets)`` arrays used by the kernels."""
        targets = tuple(int(t) for t in targets)
        if len(set(targets)) != len(targets):
            raise DimensionError(f"repeated target index in {targets}")
        if any(t < 0 or t >= len(self.dims) for t in targets):
            raise DimensionError(f"target out of range for {len(self.dims)} subsystems: {targets}")
        return _index_maps(self.dims, targets)

    def basis_index(self, digits: Sequence[int]) -> int:
        if len(digits) != len(self.dims):
            raise DimensionError("digit count does not match layout")
        return int(np.ravel_multi_index(tuple(digits), self.dims))

    def digits(self, index: int) -> tuple[int, ...]:
        return tuple(int(x) for x in np.unravel_index(index, self.dims))


@lru_cache(maxsize=4096)
def _index_maps(dims: tuple[int, ...], targets: tuple[int, ...]):
    strides = [int(np.prod(dims[k + 1:])) for k in range(len(dims))]
    offsets = np.zeros(1, dtype=np.intp)
    for t in targets:
        offsets = (offsets[:, None] + np.arange(dims[t], dtype=np.intp)[None, :] * strides[t]).ravel()
    base = np.zeros(1, dtype=np.intp)
    for k in range(len(dims)):
        if k in targets:
            continue
        base = (base[:, None] + np.arange(dims[k], dtype=np.intp)[None, :] * strides[k]).ravel()
    offsets.setflags(write=False)
    base.setflags(write=False)
    return base, offsets


@dataclass(frozen=True, eq=False)
class StateVector:
    """Un-normalized amplitude vector; ``amps`` is a read-only complex array."""

    layout: SpaceLayout
    amps: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amps, dtype=np.complex128).ravel()
        if amps.shape[0] != self.layout.total:
            raise DimensionError(f"{amps.shape[0]} amplitudes for a layout of total dimension {self.layout.total}")
        if not np.all(np.isfinite(amps)):
            raise ValidationError("state vector has non-finite amplitudes")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def basis(cls, layout: SpaceLayout, digits: Sequence[int] | None = None) -> "StateVector":
        amps = np.zeros(layout.total, dtype=np.complex128)
        amps[0 if digits is None else layout.basis_index(digits)] = 1.0
        return cls(layout, amps)

    @classmethod
    def zeros(cls, layout: SpaceLayout) -> "StateVector":
        return cls(layout, np.zeros(layout.total, dtype=np.complex128))

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def inner(self, other: "StateVector") -> complex:
        _same_layout(self, other)
        return complex(np.vdot(self.amps, other.amps))

    def __add__(self, other: "StateVector") -> "StateVector":
        _same_layout(self, other)
        return StateVector(self.layout, self.amps + other.amps)

    def __sub__(self, other: "StateVector") -> "StateVector":
        _same_layout(self, other)
        return StateVector(self.layout, self.amps - other.amps)

    def __mul__(self, scalar) -> "StateVector":
        return StateVector(self.layout, self.amps * complex(scalar))

    __rmul__ = __mul__

    def allclose(self, other: "StateVector", atol: float = ALGEBRA_TOL) -> bool:
        return self.layout == other.layout and bool(np.allclose(self.amps, other.amps, rtol=0, atol=atol))

    def __repr__(self):
        nz = [(self.layout.digits(i), a) for i, a in enumerate(self.amps) if abs(a) > 1e-15]
        terms = " + ".join(f"({a.real:.6g}{a.imag:+.6g}j)|{''.join(map(str, d))}>" for d, a in nz[:8])
        return f"StateVector({terms or '0'}{' + ...' if len(nz) > 8 else ''})"


def _same_layout(a: StateVector, b: StateVector):
    if a.layout != b.layout:
        raise DimensionError(f"layouts differ: {a.layout.dims} vs {b.layout.dims}")


def as_matrix(m) -> np.ndarray:
    arr = np.asarray(m, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"operator must be a square matrix, got shape {arr.shape}")
    return np.ascontiguousarray(arr)


def is_unitary(m, tol: float = ZERO_TOL) -> bool:
    m = as_matrix(m)
    return bool(np.allclose(m.conj().T @ m, np.eye(m.shape[0]), rtol=0, atol=tol))


def is_projector(m, tol: float = ZERO_TOL) -> bool:
    m = as_matrix(m)
    return bool(np.allclose(m @ m, m, rtol=0, atol=tol) and np.allclose(m.conj().T, m, rtol=0, atol=tol))


def has_orthonormal_columns(q, tol: float = ZERO_TOL) -> bool:
    q = np.asarray(q, dtype=np.complex128)
    return bool(np.allclose(q.conj().T @ q, np.eye(q.shape[1]), rtol=0, atol=tol))


def _c128(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.complex128)


def apply_columns(op: np.ndarray, targets: Sequence[int], layout: SpaceLayout, vecs: np.ndarray) -> np.ndarray:
    """Apply ``op`` to the target factors of every column of ``vecs`` (D, C)."""
    base, offsets = layout.index_maps(targets)
    if op.shape[0] != offsets.shape[0]:
        raise DimensionError(f"operator dimension {op.shape[0]} != product of target dims {offsets.shape[0]}")
    return kernels.apply_columns(_c128(op), _c128(vecs), base, offsets)


def project_columns(q: np.ndarray, targets: Sequence[int], layout: SpaceLayout, vecs: np.ndarray,
                    qh: np.ndarray | None = None) -> np.ndarray:
    """Project every column onto ``span(q) (x) identity`` on the target factors."""
    base, offsets = layout.index_maps(targets)
    if q.shape[0] != offsets.shape[0]:
        raise DimensionError(f"basis dimension {q.shape[0]} != product of target dims {offsets.shape[0]}")
    q = _c128(q)
    qh = _c128(q.conj().T if qh is None else qh)
    return kernels.project_columns(q, qh, _c128(vecs), base, offsets)


def apply_on_targets(op, targets: Sequence[int], state: StateVector) -> StateVector:
    op = as_matrix(op)
    out = apply_columns(op, targets, state.layout, state.amps.reshape(-1, 1))
    return StateVector(state.layout, out[:, 0])


def project(p, targets: Sequence[int], state: StateVector, tol: float = ZERO_TOL) -> StateVector:
    """Un-normalized projection of ``state`` by projector ``p`` on ``targets``."""
    p = as_matrix(p)
    if not is_projector(p, tol):
        raise ValidationError("matrix is not an orthogonal projector (P^2 != P or P^dagger != P)")
    return apply_on_targets(p, targets, state)


def project_onto(q, targets: Sequence[int], state: StateVector) -> StateVector:
    """Projection onto the span of the orthonormal columns ``q``."""
    q = np.ascontiguousarray(np.asarray(q, dtype=np.complex128))
    if q.ndim == 1:
        q = q.reshape(-1, 1)
    out = project_columns(q, targets, state.layout, state.amps.reshape(-1, 1))
    return StateVector(state.layout, out[:, 0])


def validate_basis(vectors: Sequence[StateVector], tol: float = ZERO_TOL) -> bool:
    """True iff the vectors are pairwise orthogonal with unit norm, within ``tol``."""
    if not vectors:
        return True
    layout = vectors[0].layout
    if any(v.layout != layout for v in vectors):
        raise DimensionError("vectors do not share one layout")
    m = np.stack([v.amps for v in vectors], axis=1)
    return has_orthonormal_columns(m, tol)


def rotation(theta: float) -> np.ndarray:
    """Real rotation ``|0> -> cos|0> + sin|1>``, ``|1> -> -sin|0> + cos|1>``."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


NOT = np.array([[0, 1], [1, 0]], dtype=np.complex128)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128)


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary from the QR decomposition of a Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))

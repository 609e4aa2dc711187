"""Constructors for the reference protocols.

- ``example1``: repeated small rotations of the switch with an output
  measurement after every insertion (Zeno-style interaction-free measurement).
- ``example2``: a single insertion followed by a measurement in an entangled
  three-qubit basis; yields counterfactual outcomes of both types.
- ``karm``: K-arm interferometer on a K-dimensional switch.
- ``simplex_extension``: (K+1)-valued output register with measurement vectors
  built from a regular simplex; yields "not s" exclusion information.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ValidationError
from .history import outcome_records
from .protocol import (InsertionStep, MeasurementStep, Protocol, UnitaryStep, karm_computer, simplex_computer,
                       standard_computer)
from .tensor import SpaceLayout, has_orthonormal_columns, rotation

EXAMPLE2_OPTIMAL_C2 = 2 - math.sqrt(2)
EXAMPLE2_OPTIMAL_THETA = math.acos(math.sqrt(EXAMPLE2_OPTIMAL_C2))


def _check_angle(theta: float, closed_top: bool = False):
    ok = 0 < theta <= math.pi / 2 if closed_top else 0 < theta < math.pi / 2
    if not ok:
        raise ValidationError(f"rotation angle {theta!r} outside (0, pi/2{']' if closed_top else ')'}")


# --- Example 1 ---------------------------------------------------------------

def example1(N: int, theta: float | None = None, final_rotation: float | None = None) -> Protocol:
    """``N`` rounds of [rotate switch by theta; insert; measure output, halt on 1].

    Without ``final_rotation`` the last insertion is followed directly by the
    measurement of both qubits, as in the branching diagram of the original
    protocol (history labels like ``f0f00``).  With ``final_rotation`` every
    insertion gets its own output measurement, then the switch is rotated by
    that angle before the final measurement.
    """
    if int(N) != N or N < 1:
        raise ValidationError(f"N must be a positive integer, got {N!r}")
    N = int(N)
    theta = math.pi / (2 * N) if theta is None else float(theta)
    _check_angle(theta, closed_top=True)
    rot = rotation(theta)
    steps: list = []
    for i in range(N):
        steps += [UnitaryStep((0,), rot), InsertionStep(0, 1)]
        if i < N - 1 or final_rotation is not None:
            steps.append(MeasurementStep.computational((1,), (2,), halt_on=("1",)))
    if final_rotation is None:
        steps.append(MeasurementStep.computational((0, 1), (2, 2), halt_on=("01", "11")))
    else:
        steps += [UnitaryStep((0,), rotation(final_rotation)), MeasurementStep.computational((0, 1), (2, 2))]
    meta = {"N": N, "theta": theta}
    if final_rotation is not None:
        meta["final_rotation"] = float(final_rotation)
    return Protocol(SpaceLayout((2, 2)), standard_computer(), tuple(steps), name="example1", meta=meta)


def example1_p1(N: int) -> float:
    return math.cos(math.pi / (2 * N)) ** (2 * N)


def saturating_rotation(theta: float = math.pi / 4) -> float:
    """Final switch rotation that cancels outcome ``00`` under ``U_0`` for N=1."""
    return math.pi / 2 - theta


def example1_saturating(theta: float = math.pi / 4, final_rotation: float | None = None) -> Protocol:
    """N=1 Example 1 with the extra final rotation; reaches p_1 = 1/4 at theta = pi/4."""
    phi = saturating_rotation(theta) if final_rotation is None else final_rotation
    p = example1(1, theta, final_rotation=phi)
    return Protocol(p.layout, p.computer, p.steps, name="example1_saturating", meta=p.meta)


# --- Example 2 ---------------------------------------------------------------

def x_basis(theta: float) -> list[np.ndarray]:
    """The eight measurement vectors on (switch, output, ancilla)."""
    c, s = math.cos(theta), math.sin(theta)
    t = 1 / math.sqrt(1 + s * s)
    u = 1 / math.sqrt(2 + 2 * s * s)

    def ket(*terms):
        v = np.zeros(8, dtype=np.complex128)
        for amp, bits in terms:
            v[int(bits, 2)] += amp
        return v

    return [
        t * ket((s, "000"), (-c, "100"), (s, "001")),
        t * ket((s, "000"), (-c, "110"), (-s, "001")),
        u * ket((c, "000"), (2 * s, "100"), (c, "001")),
        u * ket((c, "000"), (2 * s, "110"), (-c, "001")),
        ket((1, "010")),
        ket((1, "101")),
        ket((1, "011")),
        ket((1, "111")),
    ]


X_LABELS = tuple(f"x_{i}" for i in range(1, 9))


def example2(theta: float = EXAMPLE2_OPTIMAL_THETA) -> Protocol:
    _check_angle(theta)
    steps = (
        UnitaryStep((0,), rotation(theta)),
        InsertionStep(0, 1),
        MeasurementStep.in_basis((0, 1, 2), x_basis(theta), X_LABELS),
    )
    return Protocol(SpaceLayout((2, 2, 2)), standard_computer(), steps, name="example2", meta={"theta": theta})


def example2_p(theta: float) -> float:
    """Closed-form probability of each of the two counterfactual outcomes."""
    c2, s2 = math.cos(theta) ** 2, math.sin(theta) ** 2
    return c2 * s2 / (1 + s2)


# --- K-arm interferometer ----------------------------------------------------

def karm_rotation(K: int, b: float) -> np.ndarray:
    a2 = 1 - (K - 1) * b * b
    if a2 <= 0:
        raise ValidationError(f"(K-1) b^2 = {(K - 1) * b * b!r} must be < 1")
    a = math.sqrt(a2)
    delta = (a - 1) / (K - 1)
    R = np.zeros((K, K), dtype=np.complex128)
    R[0, 0] = a
    R[1:, 0] = b
    for j in range(1, K):
        R[0, j] = -b
        R[1:, j] = delta
        R[j, j] += 1
    return R


def karm_default_steps(b: float) -> int:
    return max(1, round(math.pi / (2 * b)))


def karm(K: int = 3, b: float = 0.1, steps: int | None = None) -> Protocol:
    """Repeat [R on switch; insert; measure output, halt on 1], then measure the switch."""
    if K < 3:
        raise ValidationError("K must be >= 3")
    if b <= 0:
        raise ValidationError("b must be positive")
    R = karm_rotation(K, b)
    steps = karm_default_steps(b) if steps is None else int(steps)
    if steps < 1:
        raise ValidationError("steps must be >= 1")
    seq: list = []
    for _ in range(steps):
        seq += [UnitaryStep((0,), R), InsertionStep(0, 1), MeasurementStep.computational((1,), (2,), halt_on=("1",))]
    seq.append(MeasurementStep.computational((0,), (K,)))
    return Protocol(SpaceLayout((K, 2)), karm_computer(K), tuple(seq), name="karm",
                    meta={"K": K, "b": b, "steps": steps})


def karm_cf_outcome(p: Protocol, arm: int) -> tuple:
    """Outcome sequence 'output always 0, switch ends in arm'."""
    return ("0",) * p.meta["steps"] + (str(arm),)


def karm_best_steps(K: int, b: float, arm: int = 1, window: int = 10) -> tuple[int, float]:
    """Scan step counts around round(pi/2b); return (argmax, p_arm)."""
    n0 = karm_default_steps(b)
    best = (n0, -1.0)
    for n in range(max(1, n0 - window), n0 + window + 1):
        p = karm(K, b, n)
        rec = outcome_records(p, arm - 1).get(karm_cf_outcome(p, arm))
        val = rec.probability if rec is not None else 0.0
        if val > best[1]:
            best = (n, val)
    return best


# --- simplex extension -------------------------------------------------------

def simplex_vectors(K: int) -> np.ndarray:
    """Rows ``y_0..y_K`` in R^K: barycentre-to-vertex vectors of a regular
    K-simplex scaled so that ``|y_i|^2 = K`` and ``<y_i|y_j> = -1``."""
    if K < 1:
        raise ValidationError("K must be >= 1")
    helmert = np.zeros((K, K + 1))
    for k in range(1, K + 1):
        helmert[k - 1, :k] = 1
        helmert[k - 1, k] = -k
        helmert[k - 1] /= math.sqrt(k * (k + 1))
    return math.sqrt(K + 1) * helmert.T


def simplex_measurement_vectors(K: int, theta: float) -> np.ndarray:
    """Columns ``v_0..v_K`` on (switch, output, K ancilla qubits)."""
    c, s = math.cos(theta), math.sin(theta)
    t = 1 / math.sqrt(1 + K * s * s)
    n_anc = 2 ** K
    dim = 2 * (K + 1) * n_anc
    Y = simplex_vectors(K)
    V = np.zeros((dim, K + 1), dtype=np.complex128)

    def idx(sw, out, anc):
        return (sw * (K + 1) + out) * n_anc + anc

    for r in range(K + 1):
        V[idx(0, 0, 0), r] += t * s
        V[idx(1, r, 0), r] -= t * c
        # y_r sits on ancilla basis states 1..K
        for k in range(K):
            V[idx(0, 0, 1 + k), r] += t * s * Y[r, k]
    return V


def simplex_extension(K: int = 2, theta: float = math.pi / 4) -> Protocol:
    """Rotate switch, insert the (K+1)-variant computer, measure in a basis
    containing ``v_0..v_K`` completed by the eigenvectors of
    ``I - V V^dagger`` with eigenvalue one."""
    if K < 2:
        raise ValidationError("K must be >= 2")
    _check_angle(theta)
    V = simplex_measurement_vectors(K, theta)
    if not has_orthonormal_columns(V, 1e-9):
        raise ValidationError("simplex measurement vectors are not orthonormal")
    dim = V.shape[0]
    lam, vecs = np.linalg.eigh(np.eye(dim) - V @ V.conj().T)
    comp = vecs[:, lam > 0.5]
    if comp.shape[1] != dim - (K + 1):
        raise ValidationError("basis completion failed (degenerate theta)")
    basis = list(V.T) + list(comp.T)
    labels = [f"v_{r}" for r in range(K + 1)] + [f"w_{i}" for i in range(comp.shape[1])]
    layout = SpaceLayout((2, K + 1) + (2,) * K)
    steps = (
        UnitaryStep((0,), rotation(theta)),
        InsertionStep(0, 1),
        MeasurementStep.in_basis(tuple(range(len(layout))), basis, labels),
    )
    return Protocol(layout, simplex_computer(K), steps, name="simplex",
                    meta={"K": K, "theta": theta, "basis_completion": "eigh(I - V V^dagger), eigenvalue-1 eigenvectors"})


def bayes_update(priors, likelihoods) -> np.ndarray:
    priors = np.asarray(priors, dtype=float)
    likelihoods = np.asarray(likelihoods, dtype=float)
    if priors.shape != likelihoods.shape:
        raise ValueError("priors and likelihoods differ in length")
    if np.any(priors < 0) or abs(priors.sum() - 1) > 1e-9:
        raise ValueError("priors must be a probability vector")
    joint = priors * likelihoods
    z = joint.sum()
    if z <= 0:
        raise ValueError("observation has zero likelihood under every variant with prior mass")
    return joint / z


def posterior_update(p: Protocol, priors, observed: str) -> np.ndarray:
    """Posterior over variants after observing the single outcome ``observed``."""
    m = (observed,)
    likelihoods = []
    for r in range(len(p.computer.variants)):
        rec = outcome_records(p, r).get(m)
        likelihoods.append(rec.probability if rec is not None else 0.0)
    return bayes_update(priors, likelihoods)


# --- registry ----------------------------------------------------------------

@dataclass(frozen=True)
class Param:
    kind: type
    default: object
    help: str = ""


@dataclass(frozen=True)
class GalleryEntry:
    name: str
    params: dict
    build: Callable[..., Protocol]
    expected: dict = field(default_factory=dict)

    def make(self, **kwargs) -> Protocol:
        unknown = set(kwargs) - set(self.params)
        if unknown:
            raise KeyError(f"{self.name}: unknown parameters {sorted(unknown)}")
        args = {}
        for key, spec in self.params.items():
            val = kwargs.get(key, spec.default)
            args[key] = None if val is None else spec.kind(val)
        return self.build(**args)


ENTRIES = {
    "example1": GalleryEntry(
        "example1",
        {"N": Param(int, 2, "number of insertions"),
         "theta": Param(float, None, "rotation angle (default pi/2N)"),
         "final_rotation": Param(float, None, "optional switch rotation before the final measurement")},
        example1,
        {"p_1": "cos(pi/2N)^(2N)", "p_0": "0"}),
    "example1_saturating": GalleryEntry(
        "example1_saturating",
        {"theta": Param(float, math.pi / 4, "rotation angle"),
         "final_rotation": Param(float, None, "default pi/2 - theta")},
        example1_saturating,
        {"p_1": "1/4 at theta = pi/4"}),
    "example2": GalleryEntry(
        "example2",
        {"theta": Param(float, EXAMPLE2_OPTIMAL_THETA, "rotation angle (default: c^2 = 2 - sqrt 2)")},
        example2,
        {"p_0": "c^2 s^2 / (1 + s^2)", "p_1": "c^2 s^2 / (1 + s^2)"}),
    "karm": GalleryEntry(
        "karm",
        {"K": Param(int, 3, "number of arms"), "b": Param(float, 0.1, "rotation coupling"),
         "steps": Param(int, None, "rounds (default round(pi/2b))")},
        karm,
        {"p_r": "increases toward 1 as b decreases"}),
    "simplex": GalleryEntry(
        "simplex",
        {"K": Param(int, 2, "simplex dimension"), "theta": Param(float, math.pi / 4, "rotation angle")},
        simplex_extension,
        {"P(v_s | U_s)": "0"}),
}


def get(name: str, **kwargs) -> Protocol:
    if name not in ENTRIES:
        raise KeyError(f"unknown gallery entry {name!r}; known: {sorted(ENTRIES)}")
    return ENTRIES[name].make(**kwargs)


def small_instances() -> list[Protocol]:
    """One small instance of every gallery entry, cheap enough for deferral checks."""
    return [
        example1(1), example1(2, math.pi / 4), example1(3), example1_saturating(),
        example2(), example2(0.5), karm(3, 0.5), karm(4, 0.45, 3), simplex_extension(2),
    ]


def default_instances() -> list[Protocol]:
    """Every gallery entry at its full-size default parameters."""
    return [
        *(example1(N) for N in (1, 2, 5, 10, 20)), example1_saturating(),
        example2(), example2(0.5), *(karm(3, b) for b in (0.2, 0.1, 0.05, 0.02)), karm(4, 0.05),
        *(simplex_extension(K) for K in (2, 3, 4)),
    ]

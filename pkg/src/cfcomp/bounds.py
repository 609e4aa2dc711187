"""Executable bounds on counterfactual probabilities, random protocol
generators for falsification, and parameter sweeps."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import gallery
from .classify import CFReport, classify
from .errors import NotApplicable
from .history import expand
from .protocol import InsertionStep, MeasurementStep, Protocol, UnitaryStep, standard_computer
from .tensor import SpaceLayout, haar_unitary

BOUND_TOL = 1e-9


@dataclass(frozen=True)
class BoundCheck:
    name: str
    lhs: float
    rhs: float
    tol: float = BOUND_TOL

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.margin >= -self.tol


def check_sum_bound(report: CFReport) -> BoundCheck:
    """``p_0 + p_1 <= 1``; only defined when both variants share an off-subspace."""
    if len(report.p) != 2:
        raise NotApplicable("the p_0 + p_1 <= 1 bound is stated for two variants")
    if not report.common_off:
        raise NotApplicable("off-subspaces of the variants differ; p_0 + p_1 <= 1 does not hold in this setting")
    return BoundCheck("p0+p1<=1", report.p_sum, 1.0)


def n_lower_bound(epsilon: float, both_types: bool) -> float:
    """Minimum insertion count for ``p_0 + p_1 = 1 - epsilon``.

    Single type: ``log2((1-eps)/eps)``; both types: ``log2((1-eps)/(2 eps))``.
    """
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    return math.log2((1 - epsilon) / (2 * epsilon if both_types else epsilon))


def check_n_bound(report: CFReport) -> BoundCheck | None:
    """``N >= n_lower_bound(1 - p_sum)``; None when the report has no CF outcome."""
    types = report.types()
    if not types:
        return None
    eps = 1 - report.p_sum
    if eps <= 0:
        return BoundCheck("N>=log2((1-eps)/(k eps))", math.inf, report.n_insertions)
    both = len(types) > 1
    return BoundCheck("N>=log2((1-eps)/(2eps))" if both else "N>=log2((1-eps)/eps)",
                      n_lower_bound(eps, both), float(report.n_insertions))


def check_n1_bounds(report: CFReport) -> list[BoundCheck]:
    """One insertion: ``p_r <= 1/4`` with one CF type, ``p_0 + p_1 <= 2/5`` with both."""
    if report.n_insertions != 1:
        raise NotApplicable(f"N=1 bounds need exactly one insertion, report has {report.n_insertions}")
    if len(report.p) != 2 or not report.common_off:
        raise NotApplicable("N=1 bounds are stated for the standard two-variant computer")
    if len(report.types()) == 2:
        return [BoundCheck("p0+p1<=2/5", report.p_sum, 0.4)]
    return [BoundCheck("p_r<=1/4", max(report.p), 0.25)]


def min_sum_squares(total: float, k: int) -> float:
    """Minimum of ``sum |x_i|^2`` over k vectors with ``|sum x_i|^2 = total``."""
    if total < 0 or k < 1:
        raise ValueError("need total >= 0 and k >= 1")
    return total / k


def min_lemma_violations(rng: np.random.Generator, samples: int = 10_000, max_k: int = 16,
                         max_dim: int = 4, tol: float = 1e-12) -> int:
    """Count random complex tuples violating ``sum |x_i|^2 >= |sum x_i|^2 / K``."""
    bad = 0
    for _ in range(samples):
        k = int(rng.integers(1, max_k + 1))
        d = int(rng.integers(1, max_dim + 1))
        x = rng.standard_normal((k, d)) + 1j * rng.standard_normal((k, d))
        # some samples nearly aligned, where the bound is tight
        if rng.random() < 0.3:
            x = x[0] * (1 + 0.01 * rng.standard_normal((k, 1)))
        s = np.sum(x, axis=0)
        total = float(np.vdot(s, s).real)
        lhs = float(np.sum(np.abs(x) ** 2))
        if lhs < min_sum_squares(total, k) - tol * max(1.0, total):
            bad += 1
    return bad


# --- random protocols ---------------------------------------------------------

def random_protocol(rng: np.random.Generator, n_insertions: int, n_qubits: int = 3,
                    measure_prob: float = 0.4) -> Protocol:
    """Generic random protocol on qubits for the standard computer.

    Random Haar unitaries on random qubit subsets, insertions on random ordered
    qubit pairs, occasional computational measurements of one qubit (sometimes
    halting), and a final Haar rotation plus full computational measurement.
    """
    steps: list = []
    for _ in range(n_insertions):
        for _ in range(int(rng.integers(1, 3))):
            size = int(rng.integers(1, min(3, n_qubits) + 1))
            targets = tuple(int(t) for t in rng.choice(n_qubits, size=size, replace=False))
            steps.append(UnitaryStep(targets, haar_unitary(2 ** size, rng)))
        pair = rng.choice(n_qubits, size=2, replace=False)
        steps.append(InsertionStep(int(pair[0]), int(pair[1])))
        if rng.random() < measure_prob:
            q = int(rng.integers(n_qubits))
            halt = ("1",) if rng.random() < 0.5 else ()
            steps.append(MeasurementStep.computational((q,), (2,), halt_on=halt))
    steps.append(UnitaryStep(tuple(range(n_qubits)), haar_unitary(2 ** n_qubits, rng)))
    steps.append(MeasurementStep.computational(tuple(range(n_qubits)), (2,) * n_qubits))
    return Protocol(SpaceLayout((2,) * n_qubits), standard_computer(), tuple(steps), name="random-generic")


def _null_component(target: np.ndarray, constraints: Sequence[np.ndarray], tol: float = 1e-10) -> np.ndarray:
    """Component of ``target`` orthogonal to the span of ``constraints``."""
    if constraints:
        a = np.stack(constraints, axis=1)
        u, s, _ = np.linalg.svd(a, full_matrices=False)
        u = u[:, s > tol * max(1.0, s.max(initial=0.0))]
        target = target - u @ (u.conj().T @ target)
    return target


def random_cf_protocol(rng: np.random.Generator, n_insertions: int, both_types: bool,
                       n_qubits: int | None = None) -> Protocol:
    """Random protocol whose final measurement is built to contain CF outcomes.

    Random unitaries surround every insertion (no intermediate measurements).
    The final basis contains ``x``, a randomly perturbed all-off vector
    projected orthogonal to the ``U_0`` final state and to every non-all-off
    ``U_1`` history (a type-1 CF outcome).  With ``both_types`` it also holds
    a type-0 vector ``y`` built the same way with the roles swapped and
    orthogonal to ``x``.  The rest of the basis is a
    random completion.
    """
    n_qubits = n_insertions + 2 if n_qubits is None else n_qubits
    dim = 2 ** n_qubits
    all_q = tuple(range(n_qubits))
    steps: list = [UnitaryStep(all_q, haar_unitary(dim, rng))]
    for _ in range(n_insertions):
        steps += [InsertionStep(0, 1), UnitaryStep(all_q, haar_unitary(dim, rng))]
    layout = SpaceLayout((2,) * n_qubits)
    comp = standard_computer()
    bare = Protocol(layout, comp, tuple(steps))
    trees = [expand(bare, r) for r in (0, 1)]
    finals = [sum((h.terminal.amps for h in t.leaves), np.zeros(dim, complex)) for t in trees]
    off = [h.terminal.amps for h in trees[0].leaves if all(x == "f" for x in h.insertion_labels)][0]
    on_hist = [[h.terminal.amps for h in t.leaves if not all(x == "f" for x in h.insertion_labels)] for t in trees]

    def pick(constraints):
        # random direction mixed into the all-off vector keeps the two CF
        # vectors orthogonal without collapsing onto span(f, n_0, n_1)
        for _ in range(50):
            g = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
            v = _null_component(off + np.linalg.norm(off) * g / np.linalg.norm(g), constraints)
            v = v / np.linalg.norm(v)
            if abs(np.vdot(v, off)) ** 2 > 1e-6:
                return v
        raise RuntimeError("could not place a CF measurement vector")

    vecs = [pick([finals[0]] + on_hist[1])]
    labels = ["c1"]
    if both_types:
        vecs.append(pick([finals[1]] + on_hist[0] + vecs))
        labels.append("c0")
    q = np.stack(vecs, axis=1)
    fill = haar_unitary(dim, rng)
    fill = fill - q @ (q.conj().T @ fill)
    u, s, _ = np.linalg.svd(fill)
    rest = u[:, : dim - q.shape[1]]
    basis = list(q.T) + list(rest.T)
    labels += [f"o{i}" for i in range(len(rest.T))]
    steps.append(MeasurementStep.in_basis(all_q, basis, labels))
    kind = "both" if both_types else "single"
    return Protocol(layout, comp, tuple(steps), name=f"random-cf-{kind}", meta={"N": n_insertions})


def random_suite(seed: int, count: int = 200, max_insertions: int = 3) -> list[Protocol]:
    """Deterministic mix of generic and CF-bearing random protocols."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        n = int(rng.integers(1, max_insertions + 1))
        kind = i % 3
        if kind == 0:
            out.append(random_protocol(rng, n, n_qubits=int(rng.integers(2, 4))))
        else:
            out.append(random_cf_protocol(rng, n, both_types=(kind == 2)))
    return out


def random_n1_suite(seed: int, count: int = 200) -> list[Protocol]:
    """N=1 protocols alternating single-type and both-type CF constructions."""
    rng = np.random.default_rng(seed)
    return [random_cf_protocol(rng, 1, both_types=bool(i % 2)) for i in range(count)]


# --- sweeps -------------------------------------------------------------------

@dataclass(frozen=True)
class Family:
    name: str
    param: str
    build: Callable[..., Protocol]
    cf_outcomes: Callable[[Protocol], Sequence] | None = None


FAMILIES = {
    "example1": Family("example1", "N", lambda N, **kw: gallery.example1(int(N), **kw)),
    "example2": Family("example2", "theta", lambda theta, **kw: gallery.example2(float(theta))),
    "karm": Family("karm", "b", lambda b, K=3, **kw: gallery.karm(int(K), float(b), kw.get("steps"))),
    "example1_saturating": Family("example1_saturating", "theta",
                                  lambda theta, **kw: gallery.example1_saturating(float(theta))),
}


@dataclass(frozen=True)
class SweepPoint:
    value: float
    n_insertions: int
    p: tuple
    p_sum: float
    checks: tuple


@dataclass(frozen=True)
class SweepResult:
    family: str
    param: str
    grid: tuple
    points: tuple
    variant_names: tuple
    extra: dict = field(default_factory=dict)

    def column(self, r: int) -> list[float]:
        return [pt.p[r] for pt in self.points]

    @property
    def p_sums(self) -> list[float]:
        return [pt.p_sum for pt in self.points]


def _point(family: Family, value, extra: dict) -> SweepPoint:
    try:
        p = family.build(value, **extra)
        rep = classify(p)
    except Exception as exc:  # report which grid point failed
        raise RuntimeError(f"{family.name} at {family.param}={value!r}: {exc}") from exc
    checks = []
    if rep.common_off and len(rep.p) == 2:
        checks.append(check_sum_bound(rep))
        if rep.n_insertions == 1:
            checks += check_n1_bounds(rep)
    nb = check_n_bound(rep)
    if nb is not None and rep.common_off:
        checks.append(nb)
    return SweepPoint(float(value), rep.n_insertions, rep.p, rep.p_sum, tuple(checks))


def sweep(family: str | Family, grid: Sequence, threads: int = 1, **extra) -> SweepResult:
    """Classify one protocol per grid value; results stay in grid order."""
    fam = FAMILIES[family] if isinstance(family, str) else family
    grid = tuple(grid)
    if len(grid) > 1:
        diffs = np.diff(np.asarray(grid, dtype=float))
        if not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ValueError("sweep grid must be strictly ordered")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(lambda v: _point(fam, v, extra), grid))
    else:
        points = [_point(fam, v, extra) for v in grid]
    names = fam.build(grid[0], **extra).computer.names if grid else ()
    return SweepResult(fam.name, fam.param, grid, tuple(points), names, dict(extra))


def sweep_insertion_trend(family: str | Family, grid: Sequence, threads: int = 1, **extra) -> SweepResult:
    """Sweep that also records whether the CF probability sum rises strictly
    with the insertion count (``extra["trend_monotone"]``)."""
    res = sweep(family, grid, threads, **extra)
    by_n = sorted(res.points, key=lambda pt: pt.n_insertions)
    sums = [pt.p_sum for pt in by_n]
    ns = [pt.n_insertions for pt in by_n]
    monotone = all(n1 < n2 and s1 < s2 for n1, n2, s1, s2 in zip(ns, ns[1:], sums, sums[1:]))
    info = dict(res.extra)
    info["trend_monotone"] = monotone
    return SweepResult(res.family, res.param, res.grid, res.points, res.variant_names, info)

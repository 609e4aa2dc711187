"""Invariant suite behind ``cfcomp verify``."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import gallery
from .bounds import (check_n1_bounds, check_n_bound, check_sum_bound, min_lemma_violations, random_n1_suite,
                     random_suite, sweep_insertion_trend)
from .classify import classify
from .errors import BoundViolation
from .history import expand, normalization_check, outcome_distribution, outcome_records
from .protocol import Protocol, decode_deferred, defer_measurements

NORM_TOL = 1e-9
SCOPES = ("all", "gallery", "random")


@dataclass(frozen=True, eq=False)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    instance: Protocol | None = None


def _label(p: Protocol, i: int | None = None) -> str:
    tag = p.name or "protocol"
    return f"{tag}#{i}" if i is not None else tag


def normalization(p: Protocol, tree: bool = False) -> list[float]:
    """Per-variant deviation of ``sum |v_h|^2`` from 1."""
    devs = []
    for r in range(len(p.computer)):
        if tree:
            total = normalization_check(expand(p, r))
        else:
            total = sum(rec.weight for rec in outcome_records(p, r).values())
        devs.append(abs(total - 1.0))
    return devs


def deferral_gap(p: Protocol) -> float:
    """Largest outcome-distribution difference between ``p`` and its deferred form."""
    q = defer_measurements(p)
    if q is p:
        return 0.0
    gap = 0.0
    for r in range(len(p.computer)):
        a = outcome_distribution(p, r)
        b = {}
        for m, prob in outcome_distribution(q, r).items():
            key = decode_deferred(m[0])
            b[key] = b.get(key, 0.0) + prob
        for key in set(a) | set(b):
            gap = max(gap, abs(a.get(key, 0.0) - b.get(key, 0.0)))
    return gap


def _bound_checks(rep):
    checks = []
    if rep.common_off and len(rep.p) == 2:
        checks.append(check_sum_bound(rep))
        if rep.n_insertions == 1:
            checks += check_n1_bounds(rep)
    nb = check_n_bound(rep)
    if nb is not None and rep.common_off:
        checks.append(nb)
    return checks


def _protocol_checks(p: Protocol, tag: str, deferral: bool) -> Iterator[CheckResult]:
    dev = max(normalization(p))
    yield CheckResult(f"normalization {tag}", dev <= NORM_TOL, f"max |sum-1| = {dev:.3g}", p)
    try:
        rep = classify(p)
    except BoundViolation as exc:
        yield CheckResult(f"classify {tag}", False, str(exc), p)
        return
    for chk in _bound_checks(rep):
        yield CheckResult(f"{chk.name} {tag}", chk.passed, f"margin {chk.margin:.6g}", p)
    if deferral:
        gap = deferral_gap(p)
        yield CheckResult(f"deferral {tag}", gap <= NORM_TOL, f"max gap {gap:.3g}", p)


def gallery_checks() -> Iterator[CheckResult]:
    for i, p in enumerate(gallery.default_instances()):
        yield from _protocol_checks(p, _label(p, i), deferral=False)
    for i, p in enumerate(gallery.small_instances()):
        dev = max(normalization(p, tree=True))
        yield CheckResult(f"tree normalization {_label(p, i)}", dev <= NORM_TOL, f"max |sum-1| = {dev:.3g}", p)
        gap = deferral_gap(p)
        yield CheckResult(f"deferral {_label(p, i)}", gap <= NORM_TOL, f"max gap {gap:.3g}", p)

    worst, worst_p = 0.0, None
    for n in range(1, 21):
        p = gallery.example1(n)
        err = abs(classify(p).p[1] - gallery.example1_p1(n))
        if err > worst:
            worst, worst_p = err, p
    yield CheckResult("example1 law N=1..20", worst <= 1e-9, f"max error {worst:.3g}", worst_p)

    p = gallery.example2()
    rep = classify(p)
    want = gallery.example2_p(gallery.EXAMPLE2_OPTIMAL_THETA)
    err = max(abs(rep.p[0] - want), abs(rep.p[1] - want))
    yield CheckResult("example2 closed form", err <= 1e-9 and len(rep.outcomes) == 2, f"max error {err:.3g}", p)

    p = gallery.example1_saturating()
    p1 = classify(p).p[1]
    yield CheckResult("saturating N=1 reaches 1/4", abs(p1 - 0.25) <= 1e-9, f"p_1 = {p1!r}", p)

    res = sweep_insertion_trend("example1", range(1, 21))
    yield CheckResult("example1 trend in N", bool(res.extra["trend_monotone"]), "")

    bs = (0.2, 0.1, 0.05, 0.02)
    res = [classify(gallery.karm(3, b)) for b in bs]
    ok = all(len(r.types()) == 2 for r in res)
    for arm in (0, 1):
        col = [r.p[arm] for r in res]
        ok = ok and all(a < b for a, b in zip(col, col[1:]))
    yield CheckResult("karm K=3 rises as b falls", ok, "")

    for K in range(2, 7):
        y = gallery.simplex_vectors(K)
        g = y @ y.T
        want_g = (K + 1) * np.eye(K + 1) - 1
        err = float(np.max(np.abs(g - want_g)))
        yield CheckResult(f"simplex vectors K={K}", err <= 1e-9, f"max error {err:.3g}")
    for K in (2, 3):
        p = gallery.simplex_extension(K)
        worst = 0.0
        for s in range(K + 1):
            worst = max(worst, outcome_distribution(p, s).get((f"v_{s}",), 0.0))
        yield CheckResult(f"simplex exclusion K={K}", worst <= 1e-9, f"max P(v_s|U_s) = {worst:.3g}", p)


def random_checks(seed: int, count: int = 200) -> Iterator[CheckResult]:
    for i, p in enumerate(random_suite(seed, count)):
        yield from _protocol_checks(p, _label(p, i), deferral=i < 12)
    for i, p in enumerate(random_n1_suite(seed + 1, count)):
        rep = classify(p)
        for chk in check_n1_bounds(rep):
            yield CheckResult(f"{chk.name} {_label(p, i)}", chk.passed, f"margin {chk.margin:.6g}", p)
    bad = min_lemma_violations(np.random.default_rng(seed), samples=10_000)
    yield CheckResult("min-lemma sampling", bad == 0, f"{bad} violations in 10000 samples")


def run(scope: str = "all", seed: int = 42, count: int = 200) -> Iterator[CheckResult]:
    if scope not in SCOPES:
        raise ValueError(f"unknown scope {scope!r}; expected one of {SCOPES}")
    if scope in ("all", "gallery"):
        yield from gallery_checks()
    if scope in ("all", "random"):
        yield from random_checks(seed, count)

"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""
import io
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from cfcomp import cli, gallery
from cfcomp.bounds import min_lemma_violations, random_n1_suite, random_suite, sweep_insertion_trend
from cfcomp.classify import classify
from cfcomp.errors import LeafCapExceeded
from cfcomp.history import expand, normalization_check, outcome_distribution, coherent_sum, outcome_records
from cfcomp.verify import deferral_gap

from conftest import ACCEPTANCE_LINES
from oracles import karm_switch_state, outcome_amplitude

RANDOM_SEED = 20240611


def report(n: int, title: str, ok: bool, detail: str):
    line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_example1_law():
    t0 = time.perf_counter()
    errs = [abs(classify(gallery.example1(n)).p[1] - math.cos(math.pi / (2 * n)) ** (2 * n)) for n in range(1, 21)]
    wall = time.perf_counter() - t0
    report(1, "example1 p_1 = cos(pi/2N)^2N, N=1..20", max(errs) <= 1e-9 and wall < 1.0,
           f"max error {max(errs):.2e} (tol 1e-9), {wall:.3f} s (limit 1 s)")


def test_criterion_02_example2_optimum():
    t0 = time.perf_counter()
    rep = classify(gallery.example2())
    wall = time.perf_counter() - t0
    c2 = 2 - math.sqrt(2)
    s2 = 1 - c2
    closed = c2 * s2 / (1 + s2)
    probs = sorted(o.probability for o in rep.outcomes)
    ok = len(probs) == 2 and rep.types() == {0, 1}
    ok = ok and all(abs(p - 0.172) <= 5e-4 for p in probs) and all(abs(p - closed) <= 1e-9 for p in probs)
    # 0.344 is twice the three-digit 0.172, so its rounding error is twice as large
    ok = ok and abs(rep.p_sum - 0.344) <= 1e-3 and abs(rep.p_sum - 2 * closed) <= 1e-9 and wall < 1.0
    report(2, "example2 at c^2 = 2 - sqrt 2", ok,
           f"p = {probs[0]:.12f}, {probs[-1]:.12f} (reference 0.172 +-5e-4, closed form {closed:.12f} +-1e-9); "
           f"p_0+p_1 = {rep.p_sum:.6f} (reference 0.344, off by {abs(rep.p_sum - 0.344):.1e}); {wall:.3f} s")


def test_criterion_03_fig1_leaves():
    p = gallery.example1(2, math.pi / 4)
    c = s = math.cos(math.pi / 4)
    k00, k10, k11 = np.eye(4)[0], np.eye(4)[2], np.eye(4)[3]
    expected = {
        0: {"f0f00": c * c * k00, "f0n10": c * s * k10, "n0f00": -s * s * k00, "n0n10": s * c * k10},
        1: {"f0f00": c * c * k00, "f0n11": c * s * k11, "n1": s * k11},
    }
    worst = 0.0
    labels_ok = True
    for r, want in expected.items():
        tree = expand(p, r)
        got = {h.label_string: h.terminal.amps for h in tree.leaves}
        nonzero = {k for k, v in got.items() if np.linalg.norm(v) > 1e-12}
        labels_ok &= nonzero == set(want)
        for k, v in got.items():
            worst = max(worst, float(np.max(np.abs(v - want.get(k, 0.0)))))
    cancel = float(np.max(np.abs(coherent_sum(expand(p, 0), ("0", "00")))))
    report(3, "history leaves of example1(2, pi/4)", labels_ok and worst <= 1e-12 and cancel <= 1e-12,
           f"labels {'match' if labels_ok else 'differ'}, max amplitude error {worst:.1e}, "
           f"(c^2 - s^2)|00> residual {cancel:.1e} (tol 1e-12)")


def _weight_sum(p, r):
    try:
        return normalization_check(expand(p, r, leaf_cap=1 << 16)), "tree"
    except LeafCapExceeded:
        return sum(rec.weight for rec in outcome_records(p, r).values()), "compact"


def test_criterion_04_normalization():
    worst, count, engines = 0.0, 0, set()
    protocols = gallery.default_instances() + gallery.small_instances() + random_suite(RANDOM_SEED, 200)
    for p in protocols:
        for r in range(len(p.computer)):
            total, engine = _weight_sum(p, r)
            engines.add(engine)
            worst = max(worst, abs(total - 1))
            count += 1
    report(4, "sum_h |v_h|^2 = 1 on gallery + 200 random", worst <= 1e-9,
           f"{count} protocol/variant pairs ({'+'.join(sorted(engines))}), max deviation {worst:.1e} (tol 1e-9)")


def test_criterion_05_sum_bound_random():
    t0 = time.perf_counter()
    suite = random_suite(RANDOM_SEED, 200)
    assert all(p.computer.common_off for p in suite)
    sums = [classify(p).p_sum for p in suite]
    wall = time.perf_counter() - t0
    bad = sum(s > 1 + 1e-9 for s in sums)
    with_cf = sum(s > 0 for s in sums)
    report(5, "p_0 + p_1 <= 1 on 200 random common-off protocols", bad == 0 and wall < 60,
           f"{bad} violations, {with_cf} protocols with CF outcomes, max p_sum {max(sums):.4f}, {wall:.2f} s")


def test_criterion_06_n1_bounds():
    sat = classify(gallery.example1_saturating()).p[1]
    reps = [classify(p) for p in random_n1_suite(RANDOM_SEED, 200)]
    single = [max(r.p) for r in reps if len(r.types()) == 1]
    both = [r.p_sum for r in reps if len(r.types()) == 2]
    margin = 0.4 - classify(gallery.example2()).p_sum
    ok = abs(sat - 0.25) <= 1e-9 and len(single) + len(both) == 200
    ok = ok and max(single) <= 0.25 + 1e-9 and max(both) <= 0.4 + 1e-9 and abs(margin - 0.056) <= 1e-3
    report(6, "N=1 bounds", ok,
           f"saturating p_1 = {sat:.12f}; random single-type max p_r {max(single):.4f} <= 1/4 "
           f"({len(single)}), both-type max {max(both):.4f} <= 2/5 ({len(both)}); example2 margin {margin:.5f}")


def test_criterion_07_insertion_trend():
    res = sweep_insertion_trend("example1", range(1, 21))
    ok = bool(res.extra["trend_monotone"])
    worst = math.inf
    for pt in res.points:
        eps = 1 - pt.p_sum
        need = math.log2((1 - eps) / (2 * eps)) if 0 < eps < 1 else -math.inf
        worst = min(worst, pt.n_insertions - need)
    eps = [1 - s for s in res.p_sums]
    ok = ok and worst >= -1e-9 and all(a > b for a, b in zip(eps[1:], eps[2:]))
    report(7, "N >= log2((1-eps)/(2 eps)) along example1, N=1..20", ok,
           f"min slack {worst:.4f}, eps falls from {eps[1]:.4f} (N=2) to {eps[-1]:.4f} (N=20), "
           f"trend monotone: {res.extra['trend_monotone']}")


def test_criterion_08_karm():
    t0 = time.perf_counter()
    grid = (0.2, 0.1, 0.05, 0.02)
    K = 3
    cols = {1: [], 2: []}
    worst = 0.0
    classified = True
    for b in grid:
        p = gallery.karm(K, b)
        steps = round(math.pi / (2 * b))
        assert p.meta["steps"] == steps
        rep = classify(p)
        for arm in (1, 2):
            found = rep.of_type(arm - 1)
            classified &= len(found) == 1 and found[0].m == ("0",) * steps + (str(arm),)
            engine = rep.p[arm - 1]
            oracle = karm_switch_state(K, b, steps, arm)[arm] ** 2
            worst = max(worst, abs(engine - oracle))
            # the arm is never reached under the other variant
            other = 2 if arm == 1 else 1
            worst = max(worst, karm_switch_state(K, b, steps, other)[arm] ** 2)
            cols[arm].append(engine)
    wall = time.perf_counter() - t0
    rising = all(all(x < y for x, y in zip(c, c[1:])) for c in cols.values())
    report(8, "K-arm K=3 over b = 0.2, 0.1, 0.05, 0.02", classified and rising and worst <= 1e-9 and wall < 30,
           f"p_1 = {', '.join(f'{x:.6f}' for x in cols[1])}; p_2 = {', '.join(f'{x:.6f}' for x in cols[2])}; "
           f"engine vs matrix iteration {worst:.1e} (tol 1e-9); {wall:.2f} s")


def test_criterion_09_simplex():
    worst_y, worst_v, worst_p = 0.0, 0.0, 0.0
    for K in range(2, 7):
        y = gallery.simplex_vectors(K)
        g = y @ y.T
        worst_y = max(worst_y, float(np.max(np.abs(g - ((K + 1) * np.eye(K + 1) - 1)))))
        v = gallery.simplex_measurement_vectors(K, math.pi / 4)
        worst_v = max(worst_v, float(np.max(np.abs(v.conj().T @ v - np.eye(K + 1)))))
        p = gallery.simplex_extension(K)
        for s in range(K + 1):
            engine = outcome_distribution(p, s).get((f"v_{s}",), 0.0)
            amp = outcome_amplitude(p, s, (f"v_{s}",))
            worst_p = max(worst_p, engine, float(np.vdot(amp, amp).real))
    report(9, "simplex construction K=2..6", max(worst_y, worst_v, worst_p) <= 1e-9,
           f"<y_i|y_j> error {worst_y:.1e}, v_r orthonormality error {worst_v:.1e}, "
           f"max P(v_s | U_s) {worst_p:.1e} (tol 1e-9)")


def test_criterion_10_deferral():
    gaps = {}
    for i, p in enumerate(gallery.small_instances()):
        gaps[i, p.name] = deferral_gap(p)
    covered = {name for _, name in gaps}
    ok = covered == set(gallery.ENTRIES) and max(gaps.values()) <= 1e-9
    report(10, "deferral preserves outcome distributions", ok,
           f"{len(gaps)} instances covering {len(covered)} gallery entries, max gap {max(gaps.values()):.1e}")


def test_criterion_11_min_lemma():
    bad = min_lemma_violations(np.random.default_rng(RANDOM_SEED), samples=10_000)
    report(11, "sum |x_i|^2 >= |sum x_i|^2 / K on 10^4 samples", bad == 0, f"{bad} violations")


def _classify_csv(argv):
    out = io.StringIO()
    assert cli.main(["classify", *argv, "--format", "csv"], out=out) == 0
    return out.getvalue()


def test_criterion_12_determinism(tmp_path):
    doc = tmp_path / "karm.json"
    from cfcomp import document
    doc.write_text(document.serialize(gallery.karm(4, 0.1)))
    outputs = {}
    for source in (str(doc), "gallery:example2", "gallery:example1:N=12"):
        runs = [_classify_csv([source, "--seed", "7", "--threads", t]) for t in ("1", "4", "1", "4")]
        proc = [subprocess.run([sys.executable, "-m", "cfcomp", "classify", source, "--seed", "7", "--format", "csv",
                                "--threads", t], capture_output=True, check=True).stdout.decode()
                for t in ("1", "4")]
        outputs[source] = len(set(runs + proc)) == 1
    report(12, "classify CSV bit-identical across runs and threads {1, 4}", all(outputs.values()),
           ", ".join(f"{k.split('/')[-1]}: {'identical' if v else 'DIFFERS'}" for k, v in outputs.items()))

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cfcomp import document, gallery
from cfcomp.bounds import (FAMILIES, BoundCheck, check_n1_bounds, check_n_bound, check_sum_bound, min_lemma_violations,
                           min_sum_squares, n_lower_bound, random_cf_protocol, random_n1_suite, random_suite, sweep,
                           sweep_insertion_trend)
from cfcomp.classify import classify
from cfcomp.errors import NotApplicable

from strategies import seeds


def test_bound_check_margin():
    c = BoundCheck("x", 0.3, 0.25)
    assert c.margin == pytest.approx(-0.05) and not c.passed
    assert BoundCheck("x", 1 + 1e-10, 1.0).passed


def test_n_lower_bound_values():
    assert n_lower_bound(0.2, False) == pytest.approx(2.0)
    assert n_lower_bound(0.2, True) == pytest.approx(1.0)
    assert n_lower_bound(1 / 3, True) == pytest.approx(0.0)
    for bad in (0, 1, -0.1):
        with pytest.raises(ValueError):
            n_lower_bound(bad, False)


def test_n_bound_not_defined_without_outcomes():
    assert check_n_bound(classify(gallery.example1(1))) is None


def test_sum_bound_needs_common_off():
    with pytest.raises(NotApplicable):
        check_sum_bound(classify(gallery.karm(3, 0.3)))
    with pytest.raises(NotApplicable):
        check_sum_bound(classify(gallery.simplex_extension(2)))


def test_n1_bounds_applicability():
    with pytest.raises(NotApplicable):
        check_n1_bounds(classify(gallery.example1(2)))
    (c,) = check_n1_bounds(classify(gallery.example2()))
    assert c.name == "p0+p1<=2/5"
    (c,) = check_n1_bounds(classify(gallery.example1_saturating()))
    assert c.name == "p_r<=1/4" and c.margin == pytest.approx(0, abs=1e-12)


def test_min_sum_squares():
    assert min_sum_squares(9.0, 3) == 3.0
    with pytest.raises(ValueError):
        min_sum_squares(-1, 2)


@given(st.lists(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False), min_size=1,
                max_size=12))
def test_min_lemma_property(xs):
    k = len(xs)
    lhs = sum(abs(x) ** 2 for x in xs)
    total = abs(sum(xs)) ** 2
    assert lhs >= min_sum_squares(total, k) - 1e-9 * max(1.0, total)


def test_min_lemma_sampler_clean():
    assert min_lemma_violations(np.random.default_rng(0), samples=2000) == 0


def test_random_suites_deterministic():
    a = [document.serialize(p) for p in random_suite(7, 12)]
    b = [document.serialize(p) for p in random_suite(7, 12)]
    assert a == b
    assert a != [document.serialize(p) for p in random_suite(8, 12)]


@given(seeds, st.integers(1, 3), st.booleans())
def test_random_cf_protocol_has_requested_types(seed, n, both):
    p = random_cf_protocol(np.random.default_rng(seed), n, both_types=both)
    rep = classify(p)
    assert rep.types() == ({0, 1} if both else {1})
    assert rep.n_insertions == n


def test_random_suites_are_not_vacuous():
    reps = [classify(p) for p in random_n1_suite(3, 40)]
    both = [r.p_sum for r in reps if len(r.types()) == 2]
    single = [max(r.p) for r in reps if len(r.types()) == 1]
    assert both and single
    assert max(both) > 0.1 and max(single) > 0.05


def test_sweep_order_and_threads():
    a = sweep("example1", [1, 2, 3, 4])
    b = sweep("example1", [1, 2, 3, 4], threads=3)
    assert [pt.p for pt in a.points] == [pt.p for pt in b.points]
    assert [pt.value for pt in a.points] == [1, 2, 3, 4]
    assert a.variant_names == ("0", "1")


def test_sweep_rejects_unordered_grid():
    with pytest.raises(ValueError):
        sweep("example1", [1, 3, 2])
    with pytest.raises(KeyError):
        sweep("nope", [1])


def test_sweep_extra_params():
    res = sweep("karm", [0.3, 0.2], K=4)
    assert res.variant_names == ("1", "2", "3")


def test_insertion_trend():
    res = sweep_insertion_trend("example1", range(1, 12))
    assert res.extra["trend_monotone"]
    flat = sweep_insertion_trend("example2", [0.4, 0.7])
    assert not flat.extra["trend_monotone"]


def test_families_registered():
    assert set(FAMILIES) >= {"example1", "example2", "karm", "example1_saturating"}
    assert FAMILIES["example1"].param == "N"

import numpy as np
import pytest

from cfcomp.errors import UnsupportedComputer, ValidationError
from cfcomp.protocol import (ComputerModel, InsertionStep, MeasurementStep, Outcome, Protocol, UnitaryStep, Variant,
                             build_u, karm_computer, signature, simplex_computer, standard_computer)
from cfcomp.tensor import NOT, SpaceLayout, is_unitary, rotation


def test_standard_computer():
    c = standard_computer()
    assert c.off(0) == (0,) and c.on(1) == (1,) and c.common_off
    assert np.allclose(build_u(c, 0), np.eye(4))
    assert np.allclose(build_u(c, 1), np.kron(np.diag([1, 0]), np.eye(2)) + np.kron(np.diag([0, 1]), NOT))


@pytest.mark.parametrize("comp", [standard_computer(), karm_computer(4), simplex_computer(3)])
def test_build_u_identity_on_off_and_shift_on_on(comp):
    d_o = comp.output_dim
    for r, v in enumerate(comp.variants):
        u = build_u(comp, r)
        assert is_unitary(u)
        for i in range(comp.switch_dim):
            for j in range(d_o):
                col = u[:, i * d_o + j]
                k = j if i in v.off else (j + v.shift) % d_o
                assert col[i * d_o + k] == 1 and np.count_nonzero(col) == 1


def test_karm_computer_off_sets():
    c = karm_computer(4)
    assert c.names == ("1", "2", "3")
    assert [c.off(r) for r in range(3)] == [(0, 1), (0, 2), (0, 3)]
    assert not c.common_off


def test_computer_validation():
    with pytest.raises(ValidationError):
        ComputerModel(2, 2, (Variant(frozenset({5}), 1, "x"),))
    with pytest.raises(ValidationError):
        ComputerModel(2, 2, (Variant(frozenset(), 2, "x"),))
    with pytest.raises(ValidationError):
        ComputerModel(2, 2, ())
    with pytest.raises(ValidationError):
        ComputerModel(2, 2, (Variant(frozenset(), 1, "x"), Variant(frozenset(), 0, "x")))
    with pytest.raises(ValueError):
        standard_computer().off(2)


def test_signature():
    comp = ComputerModel(4, 2, (Variant(frozenset({0, 1}), 1, "0"), Variant(frozenset({0, 2}), 1, "1")))
    sig = signature(comp)
    assert sig.labels == ("f", "a", "b", "n")
    assert sig.classes() == [("a", (1,)), ("b", (2,)), ("f", (0,)), ("n", (3,))]
    with pytest.raises(UnsupportedComputer):
        signature(karm_computer(4))


def _proto(steps, dims=(2, 2)):
    return Protocol(SpaceLayout(dims), standard_computer(), tuple(steps))


def test_protocol_rejects_non_unitary():
    with pytest.raises(ValidationError, match="not unitary"):
        _proto([UnitaryStep((0,), np.diag([1.0, 0.5]))])


def test_protocol_rejects_bad_dimensions():
    with pytest.raises(ValidationError):
        _proto([UnitaryStep((0, 1), rotation(0.1))])
    with pytest.raises(ValidationError):
        _proto([UnitaryStep((0, 0), np.eye(4))])
    with pytest.raises(ValidationError):
        _proto([UnitaryStep((3,), np.eye(2))])
    with pytest.raises(ValidationError):
        _proto([InsertionStep(0, 1)], dims=(3, 2))


def test_measurement_must_resolve_identity():
    incomplete = MeasurementStep((0,), (Outcome("a", np.array([1.0, 0.0])),))
    with pytest.raises(ValidationError):
        _proto([incomplete])
    skew = MeasurementStep((0,), (Outcome("a", np.array([1.0, 0.0])), Outcome("b", np.array([0.6, 0.8]))))
    with pytest.raises(ValidationError):
        _proto([skew])


def test_measurement_labels():
    with pytest.raises(ValidationError):
        MeasurementStep.computational((0,), (2,), halt_on=("7",))
    with pytest.raises(ValidationError):
        MeasurementStep.in_basis((0,), np.eye(2), ["a,b", "c"])
    with pytest.raises(ValidationError):
        MeasurementStep.in_basis((0,), np.eye(2), ["a", "a"])
    m = MeasurementStep.computational((0, 1), (2, 3))
    assert m.labels == ("00", "01", "02", "10", "11", "12")


def test_protocol_queries():
    p = _proto([UnitaryStep((0,), rotation(0.3)), InsertionStep(0, 1),
                MeasurementStep.computational((1,), (2,), ("1",)), InsertionStep(0, 1),
                MeasurementStep.computational((0, 1), (2, 2))])
    assert p.n_insertions == 2
    assert p.measurement_steps == (2, 4)
    assert p.with_steps(("0", "10")) == ((2, "0"), (4, "10"))
    with pytest.raises(ValueError):
        p.with_steps(("0", "1", "1"))
    assert p.initial_state().amps[0] == 1

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cfcomp.errors import DimensionError
from cfcomp.tensor import (CNOT, NOT, SpaceLayout, StateVector, apply_columns, apply_on_targets, has_orthonormal_columns,
                           haar_unitary, is_projector, is_unitary, project, project_columns, project_onto,
                           rotation, validate_basis)

from oracles import apply_state, embed


@st.composite
def layout_and_targets(draw):
    dims = tuple(draw(st.lists(st.integers(2, 3), min_size=1, max_size=4)))
    k = draw(st.integers(1, len(dims)))
    targets = tuple(draw(st.permutations(range(len(dims))))[:k])
    seed = draw(st.integers(0, 2 ** 32 - 1))
    return dims, targets, seed


@given(case=layout_and_targets())
def test_apply_columns_matches_reshape_oracle(case, backend):
    dims, targets, seed = case
    rng = np.random.default_rng(seed)
    layout = SpaceLayout(dims)
    op = haar_unitary(layout.target_dim(targets), rng)
    vecs = rng.standard_normal((layout.total, 3)) + 1j * rng.standard_normal((layout.total, 3))
    got = apply_columns(op, targets, layout, vecs)
    want = embed(op, targets, dims) @ vecs
    assert np.allclose(got, want, atol=1e-12)


@given(case=layout_and_targets())
def test_project_columns_matches_projector(case, backend):
    dims, targets, seed = case
    rng = np.random.default_rng(seed)
    layout = SpaceLayout(dims)
    d = layout.target_dim(targets)
    q = haar_unitary(d, rng)[:, : max(1, d // 2)]
    vecs = rng.standard_normal((layout.total, 2)) + 0j
    got = project_columns(q, targets, layout, vecs)
    want = embed(q @ q.conj().T, targets, dims) @ vecs
    assert np.allclose(got, want, atol=1e-12)


@given(st.lists(st.integers(2, 4), min_size=1, max_size=4), st.data())
def test_digits_roundtrip(dims, data):
    layout = SpaceLayout(tuple(dims))
    idx = data.draw(st.integers(0, layout.total - 1))
    assert layout.basis_index(layout.digits(idx)) == idx


def test_layout_rejects_bad_dims():
    with pytest.raises(DimensionError):
        SpaceLayout((2, 0))
    with pytest.raises(DimensionError):
        SpaceLayout(())


def test_first_subsystem_is_most_significant():
    layout = SpaceLayout((2, 3))
    assert layout.basis_index((1, 2)) == 5
    assert layout.digits(4) == (1, 1)


def test_state_vector_algebra():
    layout = SpaceLayout((2, 2))
    a = StateVector.basis(layout, (0, 1))
    b = StateVector.basis(layout, (1, 0))
    s = (a + b) * (2 ** -0.5)
    assert s.norm2 == pytest.approx(1.0)
    assert s.inner(a) == pytest.approx(2 ** -0.5)
    assert (s - s).allclose(StateVector.zeros(layout))
    with pytest.raises(ValueError):
        s.amps[0] = 1.0


def test_state_vector_layout_mismatch():
    with pytest.raises(DimensionError):
        StateVector.basis(SpaceLayout((2,))) + StateVector.basis(SpaceLayout((3,)))
    with pytest.raises(DimensionError):
        StateVector(SpaceLayout((2,)), np.zeros(3))


def test_apply_on_targets_cnot():
    layout = SpaceLayout((2, 2, 2))
    s = StateVector.basis(layout, (1, 0, 1))
    out = apply_on_targets(CNOT, (0, 2), s)
    assert out.allclose(StateVector.basis(layout, (1, 0, 0)))
    out = apply_on_targets(CNOT, (2, 1), s)
    assert out.allclose(StateVector.basis(layout, (1, 1, 1)))


def test_apply_dimension_mismatch():
    layout = SpaceLayout((2, 2))
    with pytest.raises(DimensionError):
        apply_on_targets(CNOT, (0,), StateVector.basis(layout))


def test_project_requires_projector():
    layout = SpaceLayout((2,))
    s = StateVector(layout, np.array([0.6, 0.8]))
    assert project(np.diag([1.0, 0.0]), (0,), s).allclose(StateVector(layout, np.array([0.6, 0.0])))
    with pytest.raises(ValueError):
        project(NOT, (0,), s)


def test_project_onto_columns():
    layout = SpaceLayout((2, 2))
    s = StateVector(layout, np.full(4, 0.5))
    out = project_onto(np.array([[1.0], [0.0]]), (1,), s)
    assert np.allclose(out.amps, [0.5, 0, 0.5, 0])


def test_predicates():
    assert is_unitary(rotation(0.3)) and is_unitary(CNOT) and not is_unitary(np.diag([1.0, 2.0]))
    with pytest.raises(DimensionError):
        is_unitary(np.ones((2, 3)))
    assert is_projector(np.diag([1.0, 0.0])) and not is_projector(NOT)
    assert has_orthonormal_columns(np.eye(3)[:, :2]) and not has_orthonormal_columns(np.ones((2, 1)))


@given(st.integers(1, 6), st.integers(0, 10 ** 6))
def test_haar_unitary_is_unitary(dim, seed):
    assert is_unitary(haar_unitary(dim, np.random.default_rng(seed)), 1e-12)


@given(st.floats(-10, 10))
def test_rotation(theta):
    r = rotation(theta)
    assert is_unitary(r, 1e-12)
    assert r[0, 0] == pytest.approx(np.cos(theta)) and r[1, 0] == pytest.approx(np.sin(theta))


def test_validate_basis():
    layout = SpaceLayout((2,))
    basis = [StateVector.basis(layout, (0,)), StateVector.basis(layout, (1,))]
    assert validate_basis(basis)
    assert not validate_basis(basis[:1] * 2)
    assert validate_basis([])


def test_apply_state_oracle_agrees_with_embed(rng):
    dims = (2, 3, 2)
    op = haar_unitary(6, rng)
    v = rng.standard_normal(12) + 0j
    assert np.allclose(apply_state(op, (2, 1), dims, v), embed(op, (2, 1), dims) @ v)

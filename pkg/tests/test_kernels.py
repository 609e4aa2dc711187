import numpy as np
import pytest
from hypothesis import given, strategies as st

from cfcomp import _kernels_py, kernels
from cfcomp.tensor import SpaceLayout, haar_unitary

compiled = pytest.mark.skipif("compiled" not in kernels.AVAILABLE, reason="extension not built")


@compiled
@given(st.lists(st.integers(2, 4), min_size=1, max_size=4), st.integers(1, 5), st.integers(0, 10 ** 6), st.data())
def test_backends_agree(dims, cols, seed, data):
    from cfcomp import _kernels
    rng = np.random.default_rng(seed)
    layout = SpaceLayout(tuple(dims))
    k = data.draw(st.integers(1, len(dims)))
    targets = tuple(data.draw(st.permutations(range(len(dims))))[:k])
    base, offsets = layout.index_maps(targets)
    d = len(offsets)
    op = haar_unitary(d, rng)
    q = np.ascontiguousarray(op[:, : max(1, d - 1)])
    qh = np.ascontiguousarray(q.conj().T)
    v = rng.standard_normal((layout.total, cols)) + 1j * rng.standard_normal((layout.total, cols))
    assert np.allclose(_kernels.apply_columns(op, v, base, offsets), _kernels_py.apply_columns(op, v, base, offsets),
                       atol=1e-13)
    assert np.allclose(_kernels.project_columns(q, qh, v, base, offsets),
                       _kernels_py.project_columns(q, qh, v, base, offsets), atol=1e-13)


def test_use_backend_switches_and_restores():
    start = kernels.BACKEND
    prev = kernels.use_backend("python")
    assert prev == start and kernels.BACKEND == "python"
    assert kernels.apply_columns is _kernels_py.apply_columns
    kernels.use_backend(start)
    assert kernels.BACKEND == start


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")


def test_index_maps_cached():
    layout = SpaceLayout((2, 3, 2))
    assert layout.index_maps((2, 0))[0] is layout.index_maps((2, 0))[0]

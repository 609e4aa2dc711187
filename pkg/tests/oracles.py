"""Reference computations that avoid the package's kernels and history engine."""
import numpy as np

from cfcomp.protocol import InsertionStep, MeasurementStep, UnitaryStep, build_u


def embed(op: np.ndarray, targets, dims) -> np.ndarray:
    """Full-space matrix of ``op`` on ``targets`` via tensor reshapes."""
    n = len(dims)
    total = int(np.prod(dims))
    t_dims = [dims[t] for t in targets]
    full = np.eye(total, dtype=complex).reshape(list(dims) + [total])
    opt = np.asarray(op, dtype=complex).reshape(t_dims + t_dims)
    k = len(targets)
    moved = np.moveaxis(full, list(targets), list(range(k)))
    out = np.tensordot(opt, moved, axes=(list(range(k, 2 * k)), list(range(k))))
    out = np.moveaxis(out, list(range(k)), list(targets))
    return out.reshape(total, total)


def apply_state(op, targets, dims, vec):
    t = np.asarray(vec, dtype=complex).reshape(dims)
    k = len(targets)
    t_dims = [dims[x] for x in targets]
    opt = np.asarray(op, dtype=complex).reshape(t_dims + t_dims)
    out = np.tensordot(opt, t, axes=(list(range(k, 2 * k)), list(targets)))
    return np.moveaxis(out, list(range(k)), list(targets)).reshape(-1)


def outcome_amplitude(p, r, m) -> np.ndarray:
    """Unnormalized state after observing ``m`` under ``U_r``, by straight simulation."""
    dims = p.layout.dims
    vec = np.zeros(p.layout.total, dtype=complex)
    vec[0] = 1
    u = build_u(p.computer, r)
    it = iter(m)
    for step in p.steps:
        if isinstance(step, UnitaryStep):
            vec = apply_state(step.matrix, step.targets, dims, vec)
        elif isinstance(step, InsertionStep):
            vec = apply_state(u, (step.switch, step.output), dims, vec)
        elif isinstance(step, MeasurementStep):
            lab = next(it, None)
            if lab is None:
                raise ValueError("sequence shorter than the protocol's measurements")
            o = step.outcome(lab)
            vec = apply_state(o.basis @ o.basis.conj().T, step.targets, dims, vec)
            if lab in step.halt_on:
                break
    if next(it, None) is not None:
        raise ValueError("sequence longer than the executed measurements")
    return vec


def karm_switch_state(K: int, b: float, steps: int, arm: int) -> np.ndarray:
    """Switch amplitudes after ``steps`` rounds with output always read 0 under arm ``arm``."""
    a = np.sqrt(1 - (K - 1) * b * b)
    delta = (a - 1) / (K - 1)
    R = np.full((K, K), delta)
    R[0, 0] = a
    R[1:, 0] = b
    R[0, 1:] = -b
    R[np.arange(1, K), np.arange(1, K)] += 1
    keep = np.zeros(K)
    keep[[0, arm]] = 1
    psi = np.zeros(K)
    psi[0] = 1
    for _ in range(steps):
        psi = keep * (R @ psi)
    return psi

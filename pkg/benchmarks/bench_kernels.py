"""Compare the compiled and pure-numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Times the raw kernels on a few layouts and column counts, then the end-to-end
classification of the gallery protocols, under each available backend.
"""
from __future__ import annotations

import argparse
import math
import timeit

import numpy as np

from cfcomp import gallery, kernels
from cfcomp.classify import classify
from cfcomp.tensor import SpaceLayout, apply_columns, haar_unitary, project_columns

KERNEL_CASES = [
    # dims, targets, columns
    ((2, 2), (0,), 2),
    ((2, 2, 2), (0, 1), 8),
    ((2, 4, 2, 2, 2), (0, 1), 16),
    ((2,) * 10, (3, 7), 4),
    ((2,) * 12, (0, 5, 11), 8),
]

E2E_CASES = [
    ("example1 N=1..20", lambda: [gallery.example1(n) for n in range(1, 21)]),
    ("example2", lambda: [gallery.example2()]),
    ("karm K=3 b=0.02", lambda: [gallery.karm(3, 0.02)]),
    ("simplex K=4", lambda: [gallery.simplex_extension(4)]),
]


def best(fn, repeat: int, number: int) -> float:
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench_kernels(repeat: int) -> list[tuple]:
    rng = np.random.default_rng(0)
    rows = []
    for dims, targets, cols in KERNEL_CASES:
        layout = SpaceLayout(dims)
        d = layout.target_dim(targets)
        op = haar_unitary(d, rng)
        q = np.ascontiguousarray(op[:, : max(1, d // 2)])
        vecs = rng.standard_normal((layout.total, cols)) + 1j * rng.standard_normal((layout.total, cols))
        number = max(1, int(2e5 // (layout.total * cols)))
        times = {}
        for name in kernels.AVAILABLE:
            kernels.use_backend(name)
            times[name, "apply"] = best(lambda: apply_columns(op, targets, layout, vecs), repeat, number)
            times[name, "project"] = best(lambda: project_columns(q, targets, layout, vecs), repeat, number)
        rows.append((f"D={layout.total} targets={targets} cols={cols}", times))
    return rows


def bench_e2e(repeat: int) -> list[tuple]:
    rows = []
    for label, make in E2E_CASES:
        protocols = make()
        times = {}
        for name in kernels.AVAILABLE:
            kernels.use_backend(name)
            times[name, "classify"] = best(lambda: [classify(p) for p in protocols], repeat, 1)
        rows.append((label, times))
    return rows


def show(title: str, rows: list[tuple], ops: tuple[str, ...]):
    print(title)
    for label, times in rows:
        parts = []
        for op in ops:
            cells = [f"{name} {times[name, op] * 1e6:10.1f} us" for name in kernels.AVAILABLE]
            if len(kernels.AVAILABLE) == 2:
                ratio = times["python", op] / times["compiled", op]
                cells.append(f"speedup {ratio:5.2f}x")
            parts.append(f"{op}: " + ", ".join(cells))
        print(f"  {label:32s} " + " | ".join(parts))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    start = kernels.BACKEND
    print(f"backends available: {', '.join(kernels.AVAILABLE)}")
    try:
        show("raw kernels (per call)", bench_kernels(args.repeat), ("apply", "project"))
        show("end to end", bench_e2e(max(1, math.ceil(args.repeat / 2))), ("classify",))
    finally:
        kernels.use_backend(start)


if __name__ == "__main__":
    main()

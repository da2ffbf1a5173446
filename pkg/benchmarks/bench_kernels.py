#!/usr/bin/env python3
"""Time each hot kernel on the compiled backend and the NumPy fallback.

Shapes mirror the default network's working set: convolution at the first
and last block geometries, pooling on the post-convolution map, and the
eigensolver at a typical feature dimensionality. Convolution rows include
the plain C loop nest kept in the extension (``conv2d_*_direct``) so the
numbers show why both backends route convolution through the same BLAS
path; the selection/reduction kernels are where the extension pays off.

Run from the repository root after installing the package:

    python3 benchmarks/bench_kernels.py [--repeats N] [--sample-ms MS]
"""

from __future__ import annotations

import argparse
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ssrpnet.backend import available_backends, get_kernels

BATCH = 16


def best_ms(fn: Callable[[], object], repeats: int, sample_ms: float) -> float:
    """Best per-call time in ms over `repeats` samples of equal wall budget."""
    fn()  # warm-up; also surfaces errors before timing

    t0 = time.perf_counter()
    fn()
    once = time.perf_counter() - t0
    inner = max(1, int(sample_ms / 1e3 / max(once, 1e-9)))

    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn()
        best = min(best, (time.perf_counter() - t0) / inner)
    return best * 1e3


@dataclass
class Case:
    name: str
    shape: str
    make: Callable[[object], Callable[[], object]]  # kernels module -> thunk
    variants: tuple[str, ...] = ("numpy", "compiled")


def conv_case(label: str, ci: int, co: int, t: int, f: int,
              backward: bool) -> list[Case]:
    rng = np.random.default_rng(0)
    x = np.ascontiguousarray(rng.normal(size=(BATCH, ci, t, f)))
    w = np.ascontiguousarray(rng.normal(size=(co, ci, 3, 3)))
    b = np.ascontiguousarray(rng.normal(size=co))
    dy = np.ascontiguousarray(rng.normal(size=(BATCH, co, t, f)))
    shape = f"{BATCH}x{ci}x{t}x{f} -> {co}ch"

    if backward:
        blas = lambda k: (lambda: k.conv2d_backward(x, w, dy))
        direct = lambda k: (lambda: k.conv2d_backward_direct(x, w, dy))
        op = "conv2d backward"
    else:
        blas = lambda k: (lambda: k.conv2d_forward(x, w, b))
        direct = lambda k: (lambda: k.conv2d_forward_direct(x, w, b))
        op = "conv2d forward"
    return [
        Case(f"{op} ({label})", shape, blas),
        Case(f"{op} ({label}, direct C)", shape, direct,
             variants=("compiled",)),
    ]


def pooling_cases() -> list[Case]:
    rng = np.random.default_rng(1)
    maps = np.ascontiguousarray(rng.normal(size=(BATCH * 128, 107, 10)))
    c, t, f = maps.shape
    shape = f"{c}x{t}x{f}"
    window, top_k = 9, 8

    def ssrp_b_bwd(k):
        _, starts = k.ssrp_b_forward(maps, window)
        dy = np.ascontiguousarray(rng.normal(size=(c, f)))
        return lambda: k.ssrp_b_backward(dy, starts, window, t)

    def ssrp_t_bwd(k):
        _, idx = k.ssrp_t_forward(maps, top_k)
        dy = np.ascontiguousarray(rng.normal(size=(c, f)))
        return lambda: k.ssrp_t_backward(dy, idx, t)

    dy_pool = np.ascontiguousarray(rng.normal(size=(c, t // 2, f // 2)))
    return [
        Case(f"ssrp_b forward (W={window})", shape,
             lambda k: (lambda: k.ssrp_b_forward(maps, window))),
        Case(f"ssrp_b backward (W={window})", shape, ssrp_b_bwd),
        Case(f"ssrp_t forward (K={top_k})", shape,
             lambda k: (lambda: k.ssrp_t_forward(maps, top_k))),
        Case(f"ssrp_t backward (K={top_k})", shape, ssrp_t_bwd),
        Case("gap forward", shape, lambda k: (lambda: k.gap_forward(maps))),
        Case("avgpool2x2 forward", shape,
             lambda k: (lambda: k.avgpool2x2_forward(maps))),
        Case("avgpool2x2 backward", shape,
             lambda k: (lambda: k.avgpool2x2_backward(dy_pool, t, f))),
    ]


def jacobi_case(d: int = 48) -> Case:
    rng = np.random.default_rng(2)
    a = rng.normal(size=(d, d))
    a = np.ascontiguousarray((a + a.T) / 2.0)
    return Case("jacobi_eigh", f"{d}x{d}",
                lambda k: (lambda: k.jacobi_eigh(a)))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing samples per cell (best is kept)")
    parser.add_argument("--sample-ms", type=float, default=20.0,
                        help="wall budget per timing sample")
    args = parser.parse_args()

    backends = available_backends()
    have_compiled = "compiled" in backends
    print(f"backends available: {', '.join(backends)}")
    if not have_compiled:
        print("compiled extension not built; timing the fallback only\n")

    cases: list[Case] = []
    cases += conv_case("block 1", 1, 32, 431, 40, backward=False)
    cases += conv_case("block 1", 1, 32, 431, 40, backward=True)
    cases += conv_case("block 3", 64, 128, 107, 10, backward=False)
    cases += conv_case("block 3", 64, 128, 107, 10, backward=True)
    cases += pooling_cases()
    cases.append(jacobi_case())

    name_w = max(len(c.name) for c in cases)
    shape_w = max(len(c.shape) for c in cases)
    header = (f"{'kernel':<{name_w}}  {'shape':<{shape_w}}  "
              f"{'numpy':>10}  {'compiled':>10}  {'speedup':>8}")
    print(header)
    print("-" * len(header))

    for case in cases:
        times: dict[str, float] = {}
        for backend in case.variants:
            if backend == "compiled" and not have_compiled:
                continue
            thunk = case.make(get_kernels(backend))
            times[backend] = best_ms(thunk, args.repeats, args.sample_ms)

        def cell(backend: str) -> str:
            return f"{times[backend]:8.3f}ms" if backend in times else " " * 10

        if "numpy" in times and "compiled" in times:
            speedup = f"{times['numpy'] / times['compiled']:7.2f}x"
        else:
            speedup = " " * 8
        print(f"{case.name:<{name_w}}  {case.shape:<{shape_w}}  "
              f"{cell('numpy')}  {cell('compiled')}  {speedup}")


if __name__ == "__main__":
    main()

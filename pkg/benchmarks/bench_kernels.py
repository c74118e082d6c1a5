#!/usr/bin/env python3
"""Benchmark the compiled kernel extension against the numpy fallback.

Times the system-matrix block assembly on the two access patterns that
dominate a build: full dense blocks (inadmissible leaves, dense oracles)
and single rows/columns (cross-approximation pivot sampling).

Usage: python benchmarks/bench_kernels.py [--sizes 512,2048] [--repeats 5]
"""

import argparse
import time

import numpy as np

from h2vie import _kernel_numpy, kernel

try:
    from h2vie import _kernel_core
except ImportError:
    _kernel_core = None


def time_call(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_backend(backend, geom, params, rows, cols, repeats):
    chi = params.chi(geom.n)
    diag = complex(params.k0**2 * kernel.self_term(geom.voxel_volume, params.k0))
    out = np.empty((rows.size, cols.size), dtype=np.complex128)

    def block():
        backend.assemble_block_raw(
            geom.centers, chi, params.k0, geom.voxel_volume, diag, rows, cols, out
        )

    t_block = time_call(block, repeats)

    row_out = np.empty((1, cols.size), dtype=np.complex128)

    def sample_rows():
        for i in range(0, rows.size, max(1, rows.size // 64)):
            backend.assemble_block_raw(
                geom.centers, chi, params.k0, geom.voxel_volume, diag,
                rows[i:i + 1], cols, row_out,
            )

    t_rows = time_call(sample_rows, repeats)
    return t_block, t_rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="512,2048",
                    help="comma list of block edge sizes")
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    k0 = 2.0 * np.pi
    params = kernel.KernelParams(k0=k0)
    print(f"{'N':>6} {'pattern':>12} {'numpy':>10} {'compiled':>10} {'speedup':>8}")
    for n in sizes:
        geom = kernel.generate_geometry("rod", [n / 10.0], 10, k0)
        rows = np.arange(geom.n // 2, dtype=np.int64)
        cols = np.arange(geom.n // 2, geom.n, dtype=np.int64)
        tb_np, tr_np = bench_backend(_kernel_numpy, geom, params, rows, cols,
                                     args.repeats)
        if _kernel_core is None:
            print(f"{geom.n:>6} compiled extension not built; numpy block "
                  f"{tb_np * 1e3:.2f} ms, rows {tr_np * 1e3:.2f} ms")
            continue
        tb_c, tr_c = bench_backend(_kernel_core, geom, params, rows, cols,
                                   args.repeats)
        print(f"{geom.n:>6} {'block':>12} {tb_np * 1e3:>9.2f}ms {tb_c * 1e3:>9.2f}ms "
              f"{tb_np / tb_c:>7.1f}x")
        print(f"{geom.n:>6} {'row-sample':>12} {tr_np * 1e3:>9.2f}ms {tr_c * 1e3:>9.2f}ms "
              f"{tr_np / tr_c:>7.1f}x")


if __name__ == "__main__":
    main()

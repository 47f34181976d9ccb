"""Compare the numba-compiled kernels against the pure-numpy fallbacks.

Times the partition-misfit matrix (direct and subset-factorized paths) and
the DPM Gibbs chain on representative sizes, and checks that both backends
agree.  Run from the repository root:

    python benchmarks/bench_backends.py [--quick]
"""

import argparse
import time

import numpy as np

from uncpool import kernels
from uncpool.kernels import (_combine_subsets_numpy, _dpm_chain_impl,
                             _q_matrix_numpy, partition_subset_ids, subset_q_terms)
from uncpool.partitions import enumerate_partitions


def timeit(fn, repeats=5):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_q_matrix(l, r, repeats):
    rng = np.random.default_rng(l)
    y = rng.normal(0.3, 0.1, size=l)
    v = rng.uniform(0.005, 0.05, size=l) ** 2
    th = (np.arange(1, r + 1) - 0.5) * (np.pi / 2) / r
    d2 = np.tan(th) ** 2
    space = enumerate_partitions(l)
    assign, d_arr = space.assignment_array, space.d_array

    if kernels.BACKEND == "numba":
        kernels._q_matrix_impl(y, v, d2[:4], assign, d_arr)  # warm the JIT
    t_fast, out_fast = timeit(lambda: kernels._q_matrix_impl(y, v, d2, assign, d_arr), repeats)
    t_np, out_np = timeit(lambda: _q_matrix_numpy(y, v, d2, assign, d_arr), repeats)
    assert np.allclose(out_fast, out_np, rtol=1e-11, atol=1e-13)

    terms = subset_q_terms(y, v, d2)
    flat, offsets = partition_subset_ids(assign, d_arr)
    if kernels.BACKEND == "numba":
        kernels._combine_subsets_impl(terms[:, :4].copy(), flat, offsets)
    t_sub_fast, out_a = timeit(lambda: kernels._combine_subsets_impl(terms, flat, offsets), repeats)
    t_sub_np, out_b = timeit(lambda: _combine_subsets_numpy(terms, flat, offsets), repeats)
    assert np.allclose(out_a, out_b, rtol=1e-11, atol=1e-13)
    return (t_fast, t_np), (t_sub_fast, t_sub_np), space.g


def bench_dpm_chain(sweeps, repeats):
    rng = np.random.default_rng(0)
    y = np.array([0.254, 0.361, 0.359])
    v = np.array([0.014, 0.028, 0.014]) ** 2
    l = 3
    uniforms = rng.random((sweeps, l))
    norm_phi = rng.standard_normal((sweeps, l))
    norm_eta = rng.standard_normal(sweeps)
    gammas = np.empty((sweeps, l))
    for k in range(1, l + 1):
        gammas[:, k - 1] = rng.gamma(1.0 + k / 2.0, 1.0, size=sweeps)
    args = (y, v, 3.0, 0.31, 0.011, 2.0, 0.0075, 0.31, 0.00375,
            True, True, 200, 1, uniforms, norm_phi, norm_eta, gammas)
    if kernels.BACKEND == "numba":
        kernels.dpm_chain(y, v, 3.0, 0.31, 0.011, 2.0, 0.0075, 0.31, 0.00375,
                          True, True, 2, 1, uniforms[:10], norm_phi[:10],
                          norm_eta[:10], gammas[:10])
    t_fast, out_fast = timeit(lambda: kernels.dpm_chain(*args), repeats)
    t_py, out_py = timeit(lambda: _dpm_chain_impl(*args), max(1, repeats // 2))
    # same trajectory up to last-ulp libm differences; a late assignment flip
    # is possible over long horizons, so compare chain-level summaries
    z_agree = float((out_fast[0] == out_py[0]).all(axis=1).mean())
    assert z_agree > 0.99, f"assignment agreement {z_agree}"
    assert abs(out_fast[1].mean() - out_py[1].mean()) < 1e-6
    return t_fast, t_py


def row(name, t_fast, t_np):
    label = "numba" if kernels.BACKEND == "numba" else "numpy(active)"
    speedup = t_np / t_fast if t_fast > 0 else float("inf")
    print(f"{name:38s} {label}: {t_fast * 1e3:9.2f} ms   numpy: {t_np * 1e3:9.2f} ms   x{speedup:6.1f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--quick", action="store_true", help="smaller sizes, fewer repeats")
    args = ap.parse_args()
    repeats = 3 if args.quick else 5
    sizes = [(3, 2000), (6, 500)] if args.quick else [(3, 2000), (6, 1000), (8, 200)]
    sweeps = 5000 if args.quick else 30000

    print(f"active backend: {kernels.BACKEND}")
    if kernels.BACKEND != "numba":
        print("note: numba disabled; the 'fast' column is the same numpy path")
    print()
    for l, r in sizes:
        (tq, tq_np), (ts, ts_np), g = bench_q_matrix(l, r, repeats)
        row(f"misfit matrix direct   L={l} G={g} R={r}", tq, tq_np)
        row(f"misfit matrix subsets  L={l} G={g} R={r}", ts, ts_np)
    tg, tg_py = bench_dpm_chain(sweeps, repeats)
    row(f"dpm chain             {sweeps} sweeps", tg, tg_py)


if __name__ == "__main__":
    main()

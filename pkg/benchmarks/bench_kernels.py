"""Timing comparison of the numba-compiled recursion kernels against the
pure-Python fallbacks.

Run with:  python benchmarks/bench_kernels.py
The fallback path is what you get at import time with LPVSYN_DISABLE_NUMBA=1.
"""
import time

import numpy as np

from lpvsyn import _kernels
from lpvsyn.plant import default_surrogate


def timeit(fn, *args, repeats=3):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_lpv(n_samples):
    m = default_surrogate()
    a0 = m.a0.copy()
    a0[0, 0] = 0.95  # stabilized sibling: open-loop run must stay bounded
    rng = np.random.default_rng(0)
    u = rng.standard_normal(n_samples)
    p = 40.0 + 10.0 * np.sin(np.arange(n_samples) / 500.0)
    x0 = np.zeros(3)
    args = (a0, m.a1, m.b, m.c, u, p, x0)
    _kernels.lpv_recursion(*args)  # compile outside the timer
    t_jit, y_jit = timeit(_kernels.lpv_recursion, *args)
    t_py, y_py = timeit(_kernels.lpv_recursion_py, *args, repeats=1)
    assert np.array_equal(y_jit, y_py)
    return t_jit, t_py


def bench_closed_loop(n_samples):
    m = default_surrogate()
    a0 = m.a0.copy()
    a0[0, 0] = 0.95  # stabilized sibling so the full horizon is exercised
    rng = np.random.default_rng(1)
    n_bank = 5
    an = np.tril(0.3 * rng.standard_normal((n_bank, n_bank)))
    np.fill_diagonal(an, 0.7)
    bn = rng.standard_normal(n_bank)
    wbar = 0.005 * rng.standard_normal((n_bank + 1, 2))
    vbar = np.zeros((n_bank + 1, 2))
    vbar[0, 0] = 1.0
    r = rng.standard_normal(n_samples)
    p = 40.0 + 10.0 * np.sin(np.arange(n_samples) / 500.0)
    d = np.zeros(n_samples)
    args = (a0, m.a1, m.b, m.c, an, bn, an, bn, wbar, vbar,
            30.0, 50.0, r, p, d, 1e12)
    out = _kernels.closed_loop_recursion(*args)
    assert out[3] == -1, "benchmark loop diverged"
    t_jit, out_jit = timeit(_kernels.closed_loop_recursion, *args)
    t_py, out_py = timeit(_kernels.closed_loop_recursion_py, *args, repeats=1)
    assert np.array_equal(out_jit[2], out_py[2])
    return t_jit, t_py


def main():
    n = 2 ** 17
    print(f"kernel benchmark, {n} samples, numba enabled: {_kernels.NUMBA_ENABLED}")
    for name, fn in (("lpv_recursion", bench_lpv),
                     ("closed_loop_recursion", bench_closed_loop)):
        t_jit, t_py = fn(n)
        label = "jit" if _kernels.NUMBA_ENABLED else "selected"
        print(f"  {name:22s}: {label} {t_jit * 1e3:8.1f} ms   "
              f"python {t_py * 1e3:8.1f} ms   speedup {t_py / t_jit:6.1f}x")


if __name__ == "__main__":
    main()

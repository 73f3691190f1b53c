"""Compare the numba-compiled kernels with their pure-Python fallbacks.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Run with SWITCHDWELL_DISABLE_JIT=1 to check that the fallback path is what
the package uses when compilation is switched off.
"""
import argparse
import time

import numpy as np

from switchdwell import _jit, bounds, linalg, signals


def _time(fn, args, repeat):
    fn(*args)  # warm-up (compilation for jitted kernels)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def cases():
    rng = np.random.default_rng(7)
    a6 = rng.standard_normal((6, 6))
    s6 = a6 + a6.T
    hurwitz = a6 - (np.max(np.linalg.eigvals(a6).real) + 1.0) * np.eye(6)
    times = np.cumsum(rng.uniform(0.5, 1.5, 400))
    times = np.concatenate([[0.0], times])
    sys2 = np.array([[[-0.1, 1.0], [-2.0, -0.1]], [[-0.03, 1.0], [-1.0, -0.03]]])
    props = np.empty((2, 9, 2, 2))
    for j in range(2):
        for k in range(9):
            props[j, k] = linalg.expm(sys2[j], 3.0 * k)
    return [
        ("expm (6x6)", linalg._expm_kernel, (a6, linalg._PADE_13)),
        ("jacobi (6x6)", linalg._jacobi_kernel, (s6, 1e-14, 100)),
        ("hessenberg (6x6)", linalg._hessenberg_kernel, (a6,)),
        ("shifted qr (6x6)", linalg._hqr_kernel, (linalg._hessenberg_kernel(a6), 60)),
        ("lyapunov kron (6x6)", linalg._lyap_kernel, (hurwitz, np.eye(6))),
        ("adt pair scan (401 bps)", signals._adt_violation, (times, 2, 0.5, np.inf)),
        ("converse enumeration", bounds._enumerate, (props, np.array([1.0, 0.5]), 0, 4, 0.01, 0.5, 10**6)),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    print(f"JIT enabled: {_jit.JIT_ENABLED}")
    print(f"{'kernel':28s} {'jit [us]':>12s} {'python [us]':>14s} {'speed-up':>10s}")
    for name, fn, fargs in cases():
        pure = getattr(fn, "py_func", fn)
        t_jit = _time(fn, fargs, args.repeat)
        t_py = _time(pure, fargs, max(1, args.repeat // 10))
        print(f"{name:28s} {t_jit * 1e6:12.1f} {t_py * 1e6:14.1f} {t_py / t_jit:10.1f}x")


if __name__ == "__main__":
    main()

"""Time the compiled kernels against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--repeat 3]
Prints one line per kernel with both timings and the speedup, and checks
that the two backends produce bitwise identical results.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from nlar_lse import _pykernels as py
from nlar_lse.rng import make_generator, polar_normals

try:
    from nlar_lse import _ckernels as cy
except ImportError:  # extension not built
    cy = None


def _best(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(T: int, m: int):
    w = polar_normals(make_generator(1), T)
    phis = np.ascontiguousarray(make_generator(2).standard_normal((T, m)))
    ys = np.ascontiguousarray(make_generator(3).standard_normal(T))
    A = phis[:200].T @ phis[:200] + np.eye(m)

    def rls(mod):
        theta, P, gram = np.zeros(m), np.eye(m), np.eye(m)
        mod.rls_update(phis, ys, theta, P, gram, np.empty(m))
        return theta

    def lin(mod):
        y = np.zeros(T + 1)
        mod.simulate_linear(np.array([0.5, -0.2, 0.1]), w, y, 0.0, 1e12)
        return y

    def tar(mod):
        y = np.zeros(T + 1)
        mod.simulate_tar(np.array([0.5, -0.7]), np.array([-2.0, 0.0]), np.array([0.0, 2.0]), 0, w, y, 0.0, 1e12)
        return y

    def exar(mod):
        y = np.zeros(T + 1)
        mod.simulate_exar(np.array([0.4, 0.1]), np.array([0.3, -0.2]), 1.0, w, y, 0.0, 1e12)
        return y

    def jac(mod):
        return mod.jacobi_eigenvalues(A, 1e-12, 100)[0]

    return {"rls_update": rls, "simulate_linear": lin, "simulate_tar": tar,
            "simulate_exar": exar, "jacobi_eigenvalues": jac}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--T", type=int, default=50_000)
    ap.add_argument("--m", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if cy is None:
        print("compiled extension not available; only the Python backend can run")
    for name, fn in cases(args.T, args.m).items():
        tp, outp = _best(lambda: fn(py), args.repeat)
        if cy is None:
            print(f"{name:20s} python {tp * 1e3:9.2f} ms")
            continue
        tc, outc = _best(lambda: fn(cy), args.repeat)
        same = np.array_equal(outp, outc)
        print(f"{name:20s} python {tp * 1e3:9.2f} ms  cython {tc * 1e3:8.3f} ms  "
              f"speedup {tp / tc:7.1f}x  identical={same}")


if __name__ == "__main__":
    main()

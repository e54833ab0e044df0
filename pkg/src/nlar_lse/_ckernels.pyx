# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Operation order mirrors ``_pykernels`` exactly."""
from libc.math cimport exp, fabs, sqrt, isfinite

import numpy as np

BACKEND = "cython"

cdef enum:
    G_IDENTITY = 0
    G_ONE = 1
    G_SQUARE = 2
    G_ABS = 3
    G_CUBE = 4


def rls_update(const double[:, ::1] phis, const double[::1] ys, double[::1] theta,
               double[:, ::1] P, double[:, ::1] gram, double[::1] work):
    """Run the recursion over ``len(ys)`` samples, mutating theta, P and gram.

    ``work`` must hold at least ``m`` doubles. Returns ``(sum of |phi|^2, bad)``
    where ``bad`` is the first step yielding a non-finite state, or -1.
    """
    cdef Py_ssize_t k = phis.shape[0], m = phis.shape[1]
    cdef Py_ssize_t t, i, j
    cdef double s, e, pi, sym, sumsq = 0.0, nrm
    cdef Py_ssize_t bad = -1
    with nogil:
        for t in range(k):
            # work = P phi
            s = 1.0
            e = ys[t]
            nrm = 0.0
            for i in range(m):
                pi = 0.0
                for j in range(m):
                    pi = pi + P[i, j] * phis[t, j]
                work[i] = pi
            for i in range(m):
                s = s + phis[t, i] * work[i]
                e = e - phis[t, i] * theta[i]
                nrm = nrm + phis[t, i] * phis[t, i]
            for i in range(m):
                for j in range(m):
                    P[i, j] = P[i, j] - work[i] * work[j] / s
            for i in range(m):
                for j in range(i + 1, m):
                    sym = (P[i, j] + P[j, i]) / 2.0
                    P[i, j] = sym
                    P[j, i] = sym
            for i in range(m):
                theta[i] = theta[i] + work[i] / s * e
                for j in range(m):
                    gram[i, j] = gram[i, j] + phis[t, i] * phis[t, j]
            sumsq = sumsq + nrm
            if not (isfinite(s) and isfinite(e)):
                bad = t
                break
            for i in range(m):
                if not isfinite(theta[i]):
                    bad = t
                    break
            if bad >= 0:
                break
    return sumsq, bad


def jacobi_eigenvalues(const double[:, ::1] A, double tol, int max_sweeps):
    """Cyclic Jacobi on a copy of symmetric ``A``.

    Stops once the off-diagonal Frobenius norm is below ``tol * ||A||_F``.
    Returns ``(eigenvalues, sweeps)``; sweeps is -1 on non-convergence.
    """
    cdef Py_ssize_t n = A.shape[0], p, q, r
    cdef double[:, ::1] a = np.array(A, dtype=np.float64, copy=True)
    cdef double fro = 0.0, off, theta, t, c, s, tau, apq, arp, arq
    cdef int sweep, done = -1
    for p in range(n):
        for q in range(n):
            fro = fro + a[p, q] * a[p, q]
    fro = sqrt(fro)
    with nogil:
        for sweep in range(max_sweeps + 1):
            off = 0.0
            for p in range(n):
                for q in range(n):
                    if p != q:
                        off = off + a[p, q] * a[p, q]
            if sqrt(off) <= tol * fro:
                done = sweep
                break
            if sweep == max_sweeps:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if apq == 0.0:
                        continue
                    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                    if fabs(theta) > 1e150:
                        t = 0.5 / theta
                    else:
                        t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                        if theta < 0.0:
                            t = -t
                    c = 1.0 / sqrt(t * t + 1.0)
                    s = t * c
                    tau = s / (1.0 + c)
                    a[p, p] = a[p, p] - t * apq
                    a[q, q] = a[q, q] + t * apq
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    for r in range(n):
                        if r != p and r != q:
                            arp = a[r, p]
                            arq = a[r, q]
                            a[r, p] = arp - s * (arq + tau * arp)
                            a[r, q] = arq + s * (arp - tau * arq)
                            a[p, r] = a[r, p]
                            a[q, r] = a[r, q]
    eig = np.empty(n, dtype=np.float64)
    for p in range(n):
        eig[p] = a[p, p]
    return eig, done


cdef inline int _check(double v, double thr) noexcept nogil:
    if v != v:
        return 2
    if fabs(v) > thr:
        return 1
    return 0


def simulate_linear(const double[::1] theta, const double[::1] noise, double[::1] y,
                    double y0, double threshold):
    """Fill ``y[0..T]``; returns ``(last index written, status)``.

    Status 0 = completed, 1 = exceeded threshold, 2 = NaN.
    """
    cdef Py_ssize_t T = noise.shape[0], n = theta.shape[0], t, j
    cdef double acc, v
    cdef int status = 0
    cdef Py_ssize_t last = T
    y[0] = y0
    with nogil:
        for t in range(T):
            acc = 0.0
            for j in range(n):
                if t - j >= 0:
                    acc = acc + theta[j] * y[t - j]
                else:
                    acc = acc + theta[j] * 0.0
            v = acc + noise[t]
            y[t + 1] = v
            status = _check(v, threshold)
            if status:
                last = t + 1
                break
    return last, status


def simulate_exar(const double[::1] alphas, const double[::1] betas, double gamma,
                  const double[::1] noise, double[::1] y, double y0, double threshold):
    cdef Py_ssize_t T = noise.shape[0], n = alphas.shape[0], t, j
    cdef double acc, v, e, z
    cdef int status = 0
    cdef Py_ssize_t last = T
    y[0] = y0
    with nogil:
        for t in range(T):
            e = exp(-gamma * y[t] * y[t])
            acc = 0.0
            for j in range(n):
                z = y[t - j] if t - j >= 0 else 0.0
                acc = acc + alphas[j] * z
                acc = acc + betas[j] * (z * e)
            v = acc + noise[t]
            y[t + 1] = v
            status = _check(v, threshold)
            if status:
                last = t + 1
                break
    return last, status


cdef inline double _g(int code, double z) noexcept nogil:
    if code == G_IDENTITY:
        return z
    if code == G_ONE:
        return 1.0
    if code == G_SQUARE:
        return z * z
    if code == G_ABS:
        return fabs(z)
    return z * z * z


def simulate_tar(const double[::1] theta, const double[::1] lo, const double[::1] hi, int g_code,
                 const double[::1] noise, double[::1] y, double y0, double threshold):
    cdef Py_ssize_t T = noise.shape[0], k = theta.shape[0], t, j, idx
    cdef double acc, v, z
    cdef int status = 0
    cdef Py_ssize_t last = T
    y[0] = y0
    with nogil:
        for t in range(T):
            z = y[t]
            idx = -1
            for j in range(k):
                if z >= lo[j] and z <= hi[j]:
                    idx = j
                    break
            if idx >= 0:
                acc = theta[idx] * _g(g_code, z)
            else:
                acc = z
            v = acc + noise[t]
            y[t + 1] = v
            status = _check(v, threshold)
            if status:
                last = t + 1
                break
    return last, status

"""Pure-Python fallback for ``_ckernels``.

Each function performs the same floating-point operations in the same order
as its compiled twin, so both backends agree bit for bit. Arrays are copied
into Python lists for the loop and written back afterwards.
"""
import math

import numpy as np

BACKEND = "python"

G_IDENTITY, G_ONE, G_SQUARE, G_ABS, G_CUBE = range(5)


def rls_update(phis, ys, theta, P, gram, work):
    k, m = phis.shape
    ph = phis.tolist()
    yv = ys.tolist()
    th = theta.tolist()
    Pl = P.tolist()
    G = gram.tolist()
    w = [0.0] * m
    rng = range(m)
    sumsq = 0.0
    bad = -1
    isfinite = math.isfinite
    for t in range(k):
        f = ph[t]
        s = 1.0
        e = yv[t]
        nrm = 0.0
        for i in rng:
            pi = 0.0
            row = Pl[i]
            for j in rng:
                pi = pi + row[j] * f[j]
            w[i] = pi
        for i in rng:
            s = s + f[i] * w[i]
            e = e - f[i] * th[i]
            nrm = nrm + f[i] * f[i]
        for i in rng:
            row = Pl[i]
            wi = w[i]
            for j in rng:
                row[j] = row[j] - wi * w[j] / s
        for i in rng:
            for j in range(i + 1, m):
                sym = (Pl[i][j] + Pl[j][i]) / 2.0
                Pl[i][j] = sym
                Pl[j][i] = sym
        for i in rng:
            th[i] = th[i] + w[i] / s * e
            grow = G[i]
            fi = f[i]
            for j in rng:
                grow[j] = grow[j] + fi * f[j]
        sumsq = sumsq + nrm
        if not (isfinite(s) and isfinite(e)) or not all(isfinite(v) for v in th):
            bad = t
            break
    theta[:] = th
    P[:, :] = Pl
    gram[:, :] = G
    return sumsq, bad


def jacobi_eigenvalues(A, tol, max_sweeps):
    n = A.shape[0]
    a = np.array(A, dtype=np.float64).tolist()
    fro = 0.0
    for p in range(n):
        for q in range(n):
            fro = fro + a[p][q] * a[p][q]
    fro = math.sqrt(fro)
    done = -1
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for p in range(n):
            for q in range(n):
                if p != q:
                    off = off + a[p][q] * a[p][q]
        if math.sqrt(off) <= tol * fro:
            done = sweep
            break
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p][q]
                if apq == 0.0:
                    continue
                theta = (a[q][q] - a[p][p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                tau = s / (1.0 + c)
                a[p][p] = a[p][p] - t * apq
                a[q][q] = a[q][q] + t * apq
                a[p][q] = 0.0
                a[q][p] = 0.0
                for r in range(n):
                    if r != p and r != q:
                        arp = a[r][p]
                        arq = a[r][q]
                        a[r][p] = arp - s * (arq + tau * arp)
                        a[r][q] = arq + s * (arp - tau * arq)
                        a[p][r] = a[r][p]
                        a[q][r] = a[r][q]
    return np.array([a[p][p] for p in range(n)]), done


def _check(v, thr):
    if v != v:
        return 2
    if abs(v) > thr:
        return 1
    return 0


def simulate_linear(theta, noise, y, y0, threshold):
    th = theta.tolist()
    nz = noise.tolist()
    n = len(th)
    out = [y0]
    status = 0
    for t in range(len(nz)):
        acc = 0.0
        for j in range(n):
            if t - j >= 0:
                acc = acc + th[j] * out[t - j]
            else:
                acc = acc + th[j] * 0.0
        v = acc + nz[t]
        out.append(v)
        status = _check(v, threshold)
        if status:
            break
    y[:len(out)] = out
    return len(out) - 1, status


def simulate_exar(alphas, betas, gamma, noise, y, y0, threshold):
    al = alphas.tolist()
    be = betas.tolist()
    nz = noise.tolist()
    n = len(al)
    out = [y0]
    status = 0
    exp = math.exp
    for t in range(len(nz)):
        e = exp(-gamma * out[t] * out[t])
        acc = 0.0
        for j in range(n):
            z = out[t - j] if t - j >= 0 else 0.0
            acc = acc + al[j] * z
            acc = acc + be[j] * (z * e)
        v = acc + nz[t]
        out.append(v)
        status = _check(v, threshold)
        if status:
            break
    y[:len(out)] = out
    return len(out) - 1, status


def _g(code, z):
    if code == G_IDENTITY:
        return z
    if code == G_ONE:
        return 1.0
    if code == G_SQUARE:
        return z * z
    if code == G_ABS:
        return abs(z)
    return z * z * z


def simulate_tar(theta, lo, hi, g_code, noise, y, y0, threshold):
    th = theta.tolist()
    los = lo.tolist()
    his = hi.tolist()
    nz = noise.tolist()
    k = len(th)
    out = [y0]
    status = 0
    for t in range(len(nz)):
        z = out[t]
        idx = -1
        for j in range(k):
            if los[j] <= z <= his[j]:
                idx = j
                break
        acc = th[idx] * _g(g_code, z) if idx >= 0 else z
        v = acc + nz[t]
        out.append(v)
        status = _check(v, threshold)
        if status:
            break
    y[:len(out)] = out
    return len(out) - 1, status

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nlar_lse import _pykernels
from nlar_lse.kernels import BACKEND, available_backends
from nlar_lse.rng import make_generator, mix_seed, polar_normals, splitmix64

BACKENDS = available_backends()
requires_ext = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")


class TestRng:
    def test_splitmix_reference(self):
        # published SplitMix64 stream for state 0: outputs of splitmix64(k * gamma)
        assert splitmix64(0x9E3779B97F4A7C15) == 0xE220A8397B1DCDAF
        assert splitmix64(2 * 0x9E3779B97F4A7C15 & (2**64 - 1)) == 0x6E789E6AA1B965F4

    def test_mix_seed_distinct(self):
        seeds = {mix_seed(1, r) for r in range(1000)}
        assert len(seeds) == 1000
        assert all(0 <= s < 2**64 for s in seeds)

    def test_polar_prefix_stable(self):
        a = polar_normals(make_generator(5), 10)
        b = polar_normals(make_generator(5), 10_000)
        assert np.array_equal(a, b[:10])

    def test_polar_moments(self):
        z = polar_normals(make_generator(7), 400_000)
        assert abs(z.mean()) < 0.01
        assert abs(z.var() - 1) < 0.01
        assert abs(np.mean(z**4) - 3) < 0.05

    def test_same_seed_same_stream(self):
        assert np.array_equal(polar_normals(make_generator(3), 100), polar_normals(make_generator(3), 100))


def _rls(mod, phis, ys):
    m = phis.shape[1]
    theta, P, gram = np.zeros(m), np.eye(m), np.eye(m)
    out = mod.rls_update(np.ascontiguousarray(phis), np.ascontiguousarray(ys), theta, P, gram, np.empty(m))
    return theta, P, gram, out


@requires_ext
class TestBackendsBitwise:
    @given(st.integers(1, 5), st.integers(1, 60), st.integers(0, 2**32))
    def test_rls(self, m, k, seed):
        g = make_generator(seed)
        phis = g.standard_normal((k, m)) * g.random() * 10
        ys = g.standard_normal(k)
        a = _rls(BACKENDS["cython"], phis, ys)
        b = _rls(BACKENDS["python"], phis, ys)
        for x, y in zip(a[:3], b[:3]):
            assert np.array_equal(x, y)
        assert a[3] == b[3]

    @given(st.integers(1, 6), st.integers(0, 2**32))
    def test_jacobi(self, m, seed):
        A = make_generator(seed).standard_normal((m, m))
        A = A + A.T
        ea, sa = BACKENDS["cython"].jacobi_eigenvalues(A, 1e-12, 100)
        eb, sb = BACKENDS["python"].jacobi_eigenvalues(A, 1e-12, 100)
        assert np.array_equal(ea, eb) and sa == sb

    @given(st.lists(st.floats(-1.2, 1.2), min_size=1, max_size=3), st.integers(0, 2**32))
    def test_simulate_linear(self, theta, seed):
        w = polar_normals(make_generator(seed), 300)
        outs = []
        for mod in (BACKENDS["cython"], BACKENDS["python"]):
            y = np.zeros(301)
            outs.append((mod.simulate_linear(np.array(theta), w, y, 0.3, 1e6), y))
        assert outs[0][0] == outs[1][0] and np.array_equal(outs[0][1], outs[1][1])

    @given(st.floats(0.1, 3), st.integers(0, 2**32))
    def test_simulate_exar(self, gamma, seed):
        w = polar_normals(make_generator(seed), 300)
        outs = []
        for mod in (BACKENDS["cython"], BACKENDS["python"]):
            y = np.zeros(301)
            outs.append((mod.simulate_exar(np.array([0.4, 0.3]), np.array([-0.5, 0.2]), gamma, w, y, 0.0, 1e12), y))
        assert outs[0][0] == outs[1][0] and np.array_equal(outs[0][1], outs[1][1])

    @given(st.integers(0, 4), st.integers(0, 2**32))
    def test_simulate_tar(self, code, seed):
        w = polar_normals(make_generator(seed), 300)
        outs = []
        for mod in (BACKENDS["cython"], BACKENDS["python"]):
            y = np.zeros(301)
            outs.append((mod.simulate_tar(np.array([0.5, -0.7]), np.array([-2.0, 0.0]), np.array([0.0, 2.0]),
                                          code, w, y, 0.0, 1e12), y))
        assert outs[0][0] == outs[1][0] and np.array_equal(outs[0][1], outs[1][1])


class TestKernels:
    def test_backend_name(self):
        assert BACKEND in BACKENDS

    def test_rls_one_sample(self, backend):
        theta, P, gram, (sumsq, bad) = _rls(backend, np.array([[1.0]]), np.array([2.0]))
        assert theta.tolist() == [1.0] and P.tolist() == [[0.5]] and gram.tolist() == [[2.0]]
        assert sumsq == 1.0 and bad == -1

    def test_rls_reports_bad_step(self, backend):
        phis = np.array([[1.0], [np.inf], [1.0]])
        *_, (_, bad) = _rls(backend, phis, np.zeros(3))
        assert bad == 1

    def test_simulate_status(self, backend):
        w = np.ones(100)
        y = np.zeros(101)
        last, status = backend.simulate_linear(np.array([2.0]), w, y, 0.0, 1e3)
        assert status == 1 and abs(y[last]) > 1e3 and np.all(np.abs(y[:last]) <= 1e3)
        y = np.zeros(101)
        w[3] = np.nan
        assert backend.simulate_linear(np.array([0.5]), w, y, 0.0, 1e3) == (4, 2)

    def test_jacobi_nonconvergence_flag(self, backend):
        A = make_generator(1).standard_normal((5, 5))
        _, sweeps = backend.jacobi_eigenvalues(A + A.T, 1e-12, 0)
        assert sweeps == -1

    @pytest.mark.parametrize("seed", range(10))
    def test_jacobi_vs_characteristic_polynomial(self, backend, seed):
        # oracle: roots of det(lambda I - A) built from Faddeev-LeVerrier coefficients
        g = make_generator(100 + seed)
        B = g.standard_normal((4, 4))
        A = B @ B.T + np.eye(4)
        n = 4
        coeffs = [1.0]
        Mk = np.zeros((n, n))
        for k in range(1, n + 1):
            Mk = A @ Mk + coeffs[-1] * np.eye(n)
            coeffs.append(-np.trace(A @ Mk) / k)
        roots = np.sort(np.roots(coeffs).real)
        eig, sweeps = backend.jacobi_eigenvalues(A, 1e-12, 100)
        assert sweeps >= 0
        np.testing.assert_allclose(np.sort(eig), roots, rtol=1e-9)


def test_python_backend_is_pure():
    assert _pykernels.BACKEND == "python"
